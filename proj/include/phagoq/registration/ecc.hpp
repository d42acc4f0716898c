#pragma once

#include <string>
#include <vector>

#include "phagoq/imgcore/ops.hpp"

namespace phagoq::registration {

// Translation that maps the moving frame back onto the reference: if
// moving = warp_translate(reference, dx, dy) the ideal estimate is (dx, dy).
struct WarpEstimate {
  double dx = 0.0;
  double dy = 0.0;
  double rho = 0.0;  // correlation coefficient at (dx, dy)
  int iterations = 0;
  bool converged = false;
  std::string note;  // why the iteration stopped early, if it did
  std::vector<double> rho_trace;  // rho after each accepted step, starting at init
};

struct EccOptions {
  int max_iterations = 1000;
  double epsilon = 1e-4;  // stop once the accepted rho increment drops below this
  // Longest parameter update per iteration in pixels, 0 for no limit. The
  // cascade sets it to the stage's Gaussian sigma so heavily smoothed stages
  // follow the correlation ridge instead of jumping across it.
  double max_step = 0.0;
};

inline const std::vector<int> kDefaultStages = {513, 257, 129, 65, 0};

struct CascadeSchedule {
  std::vector<int> stages = kDefaultStages;  // Gaussian kernel sizes, last one 0
  EccOptions ecc;

  // Throws InvalidArgument unless kernel sizes strictly decrease, are odd
  // (or 0) and the last one is 0.
  void validate() const;
};

struct StageResult {
  int kernel_size = 0;
  WarpEstimate estimate;
};

struct CascadeEstimate {
  WarpEstimate final;
  std::vector<StageResult> stages;
};

// Pixel rectangle [x0, x0 + width) x [y0, y0 + height).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Pixels of a w x h frame that hold real data after
// warp_translate(frame, dx, dy); the rest were filled with zeros.
Rect valid_after_warp(int width, int height, double dx, double dy);

// One frame prepared for ECC: the smoothed copy of its valid region and the
// central-difference gradients, all sized like `region`. Pixels outside the
// region never enter any sum, and smoothing does not mix them in.
struct EccImage {
  Frame image;
  Field gx;
  Field gy;
  Rect region;
  int frame_width = 0;
  int frame_height = 0;
};

EccImage prepare(const Frame& frame, const GaussianSpec& smoothing, BorderMode border = BorderMode::Reflect,
                 const simd::KernelTable& k = simd::active());
EccImage prepare(const Frame& frame, const GaussianSpec& smoothing, const Rect& region,
                 BorderMode border = BorderMode::Reflect, const simd::KernelTable& k = simd::active());

// Prepared copies of a frame for every cascade stage.
struct Pyramid {
  std::vector<EccImage> levels;
};
Pyramid prepare_pyramid(const Frame& frame, const CascadeSchedule& schedule,
                        const simd::KernelTable& k = simd::active());
Pyramid prepare_pyramid(const Frame& frame, const CascadeSchedule& schedule, const Rect& region,
                        const simd::KernelTable& k = simd::active());

// Gauss-Newton ECC over a pure translation. Template pixels outside the
// reference region, or whose warped position falls outside the moving
// region, are left out of every sum. Steps that would
// lower rho are halved until they do not (or the step becomes negligible),
// so rho never decreases across accepted steps. Throws DegenerateInput when
// either frame has no variance over the overlap.
WarpEstimate ecc_translate(const Frame& reference, const Frame& moving, double init_dx = 0.0, double init_dy = 0.0,
                           const EccOptions& options = {}, const simd::KernelTable& k = simd::active());
WarpEstimate ecc_translate(const EccImage& reference, const EccImage& moving, double init_dx, double init_dy,
                           const EccOptions& options, const simd::KernelTable& k = simd::active());

// Coarse-to-fine ECC: stage i runs on both frames smoothed with stage i's
// kernel, starting from stage i-1's estimate. Smoothed stages cap the step
// length at their sigma; the unsmoothed stage runs exactly as ecc_translate.
CascadeEstimate cecc(const Frame& reference, const Frame& moving, const CascadeSchedule& schedule = {},
                     const simd::KernelTable& k = simd::active());
CascadeEstimate cecc(const Pyramid& reference, const Pyramid& moving, const CascadeSchedule& schedule,
                     const simd::KernelTable& k = simd::active());

// Correlation coefficient of reference and moving sampled at +(dx, dy) over
// the valid overlap. Used by tests and the backtracking line search.
double correlation_at(const Frame& reference, const Frame& moving, double dx, double dy);

}  // namespace phagoq::registration
