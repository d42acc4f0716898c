#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "phagoq/registration/ecc.hpp"

namespace phagoq::registration {

struct HarnessTrial {
  double true_dx = 0.0;
  double true_dy = 0.0;
  double est_dx = 0.0;
  double est_dy = 0.0;
  double rho = 0.0;
  bool converged = false;
  double seconds = 0.0;

  double err_x() const { return est_dx - true_dx; }
  double err_y() const { return est_dy - true_dy; }
};

struct AxisStats {
  double mean_abs = 0.0;
  double std_abs = 0.0;  // sample std of |error|
  double mean_signed = 0.0;
};

struct HarnessResult {
  std::vector<HarnessTrial> trials;
  AxisStats x;
  AxisStats y;
  double total_seconds = 0.0;
};

struct HarnessOptions {
  int trials = 100;
  double max_shift = 100.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Draws independent uniform shifts in [-max_shift, max_shift] per axis, warps
// the image by each, and measures the cascade estimate against the truth.
// Shifts are drawn up front from `seed`, so results do not depend on the
// worker count. Requires max_shift < 0.45 * min(width, height).
HarnessResult shift_eval_harness(const Frame& image, const HarnessOptions& options,
                                 const CascadeSchedule& schedule = {});

AxisStats axis_stats(const std::vector<double>& errors);

// Per-trial rows plus summary lines as CSV.
void write_harness_csv(const std::filesystem::path& path, const HarnessResult& result);

}  // namespace phagoq::registration
