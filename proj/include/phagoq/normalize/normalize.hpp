#pragma once

#include <filesystem>
#include <optional>
#include <span>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::normalize {

enum class Channel { Aggregates, Cells };

struct Gaussian {
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

struct NormalizationProfile {
  Channel channel = Channel::Aggregates;
  double lo_percentile = 0.0;  // fractions in [0,1]
  double hi_percentile = 1.0;
  double lo_value = 0.0;
  double hi_value = 1.0;
  std::optional<Gaussian> reference;  // cells only

  friend bool operator==(const NormalizationProfile&, const NormalizationProfile&) = default;
};

inline constexpr double kAggregateLoPercentile = 0.005;
inline constexpr double kAggregateHiPercentile = 0.995;

// Quantile with linear interpolation between order statistics: the value at
// position q*(n-1) of the sorted sample.
double quantile_sorted(std::span<const float> sorted, double q);
double quantile(std::span<const float> values, double q);

// Percentiles default to 0.5/99.5 % for aggregates and 0/100 % for cells.
// Cells also get a Gaussian reference fitted to frame-0 intensities.
// Throws DegenerateInput when lo_value == hi_value.
NormalizationProfile fit_profile(const Frame& first_frame, Channel channel);
NormalizationProfile fit_profile(const Frame& first_frame, Channel channel, double lo_percentile,
                                 double hi_percentile);

// v -> clamp((v - lo) / (hi - lo), 0, 1)
Frame apply_global(const Frame& frame, const NormalizationProfile& profile);

// Maps each pixel's midrank empirical CDF value u = (#less + #equal/2) / n
// through the reference inverse CDF, then min-max rescales to [0,1]. A
// constant frame maps to 0.5 everywhere.
Frame match_histogram_gaussian(const Frame& frame, const Gaussian& reference);

void save_profile(const std::filesystem::path& path, const NormalizationProfile& profile);
NormalizationProfile load_profile(const std::filesystem::path& path);

}  // namespace phagoq::normalize
