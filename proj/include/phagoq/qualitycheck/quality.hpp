#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phagoq/imgcore/ops.hpp"
#include "phagoq/registration/sequence.hpp"

namespace phagoq::quality {

struct BlurConfig {
  double epsilon_blur = 0.01;
  int lookahead_B = 14;
  double max_blurry_fraction = 0.05;

  void validate() const;
};

// Population variance of the five-point Laplacian response.
double laplacian_variance(const Raster<float>& frame, BorderMode border = BorderMode::Reflect,
                          const simd::KernelTable& k = simd::active());

struct FrameQuality {
  int t = 0;
  double lap_var = 0.0;
  double rel_change = 0.0;  // |1 - lap_var / baseline|
  bool rejected = false;
  std::string reason;  // "blur" for rejected frames, otherwise an optional note
};

struct BlurFragment {
  std::vector<FrameQuality> frames;
  int baseline_resets = 0;
};

// Scans a sequence of Laplacian variances. Each frame is compared with the
// last accepted frame (the baseline). A drop beyond epsilon starts a blurry
// run that ends at the first frame within lookahead_B whose variance is back
// above baseline * (1 - epsilon); all frames of the run are rejected. No
// recovery inside a complete window resets the baseline to the frame that
// dropped, which is kept. A window cut short by the end of the sequence
// rejects the rest of the sequence. Rises beyond epsilon are kept with a
// "content change" note.
BlurFragment detect_blur(std::span<const double> lap_vars, const BlurConfig& cfg = {});
BlurFragment detect_blur(std::span<const Frame> frames, const BlurConfig& cfg = {});

struct QualityReport {
  std::vector<FrameQuality> frames;
  std::size_t rejected_count = 0;
  double blurry_fraction = 0.0;
  double max_abs_shift = 0.0;
  double shift_bound = registration::kDefaultShiftTolerancePx;
  double max_blurry_fraction = 0.05;
  int baseline_resets = 0;
  int registration_flagged = 0;
  bool pass = true;
  std::vector<std::string> fail_reasons;  // "blurry_fraction", "shift"

  // Original indices of the frames that survive rejection, increasing.
  std::vector<int> kept_indices() const;
};

QualityReport quality_gate(const registration::RegistrationTrace& trace, const BlurFragment& blur,
                           const BlurConfig& cfg = {},
                           double shift_bound = registration::kDefaultShiftTolerancePx);

// quality.csv: t, lap_var, rel_change, rejected, reason
void write_quality_csv(const std::filesystem::path& path, const QualityReport& report);
std::vector<FrameQuality> read_quality_csv(const std::filesystem::path& path);
// key: value summary lines.
void write_scene_quality(const std::filesystem::path& path, const QualityReport& report);

}  // namespace phagoq::quality
