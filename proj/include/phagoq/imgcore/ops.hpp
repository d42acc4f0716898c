#pragma once

#include <vector>

#include "phagoq/imgcore/raster.hpp"
#include "phagoq/simd/kernels.hpp"

namespace phagoq {

// How neighborhoods are extended past the frame edge.
//   Reflect:   ... c b a | a b c ... (half-sample symmetric)
//   Replicate: ... a a a | a b c ...
enum class BorderMode : std::uint8_t { Reflect, Replicate };

// Maps an arbitrary index into [0, n) under the border rule. Reflect folds
// repeatedly, so offsets larger than n are fine.
int border_index(int i, int n, BorderMode mode);

struct GaussianSpec {
  int kernel_size = 0;  // 0 disables smoothing
  double sigma = 0.0;

  static GaussianSpec none() { return {}; }
  // sigma derived from kernel_size; kernel_size 0 gives none().
  static GaussianSpec from_kernel_size(int kernel_size);

  bool enabled() const { return kernel_size > 0; }
};

// 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8, kernel_size odd and >= 3.
double gaussian_sigma(int kernel_size);

// Normalized sampled Gaussian taps, length kernel_size.
std::vector<float> gaussian_kernel(const GaussianSpec& spec);

// Separable Gaussian smoothing; output clamped to [0,1]. kernel_size 0
// returns a copy of the input.
Frame gaussian_smooth(const Frame& frame, const GaussianSpec& spec, BorderMode border = BorderMode::Reflect,
                      const simd::KernelTable& k = simd::active());

// Same convolution on an unconstrained field (no clamping).
Field convolve_separable(const Field& field, std::span<const float> taps, BorderMode border = BorderMode::Reflect,
                         const simd::KernelTable& k = simd::active());

// Five-point Laplacian, signed. Requires at least 3x3.
Field laplacian5(const Raster<float>& frame, BorderMode border = BorderMode::Reflect,
                 const simd::KernelTable& k = simd::active());

// Bilinear sample of the source at (x - dx, y - dy); samples falling outside
// the frame read as 0.
Frame warp_translate(const Frame& frame, double dx, double dy, const simd::KernelTable& k = simd::active());
Field warp_translate(const Field& field, double dx, double dy, const simd::KernelTable& k = simd::active());

// 2x2 block mean; both dimensions must be even.
Frame resize_half(const Frame& frame);

// Pixels >= threshold become 1.
BinaryMask threshold(const Raster<float>& frame, float threshold);

LabelMap label_components(const BinaryMask& binary, Connectivity connectivity = Connectivity::Eight);

std::vector<RegionFeatures> region_features(const LabelMap& labels);

// Binary dilation with the 3x3 cross, outside the frame counts as background.
BinaryMask dilate_cross(const BinaryMask& mask, int iterations);

// Euclidean distance of each foreground pixel to the nearest background
// pixel (0 on background). Pixels outside the frame are not background.
Raster<float> distance_transform(const BinaryMask& mask);

// Otsu threshold over a 256-bin histogram of [0,1] values.
float otsu_threshold(const Raster<float>& frame);

// Population mean and variance of a field.
struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};
Moments mean_variance(std::span<const float> values, const simd::KernelTable& k = simd::active());

}  // namespace phagoq
