#include "phagoq/normalize/normalize.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

namespace phagoq::normalize {

double quantile_sorted(std::span<const float> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0,1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

double quantile(std::span<const float> values, double q) {
  std::vector<float> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

NormalizationProfile fit_profile(const Frame& first_frame, Channel channel) {
  if (channel == Channel::Aggregates) {
    return fit_profile(first_frame, channel, kAggregateLoPercentile, kAggregateHiPercentile);
  }
  return fit_profile(first_frame, channel, 0.0, 1.0);
}

NormalizationProfile fit_profile(const Frame& first_frame, Channel channel, double lo_percentile,
                                 double hi_percentile) {
  if (first_frame.empty()) throw InvalidArgument("fit_profile: empty frame");
  if (!(lo_percentile >= 0.0 && lo_percentile < hi_percentile && hi_percentile <= 1.0)) {
    throw InvalidArgument("fit_profile: need 0 <= lo_percentile < hi_percentile <= 1");
  }
  std::vector<float> v(first_frame.pixels().begin(), first_frame.pixels().end());
  std::sort(v.begin(), v.end());
  NormalizationProfile p;
  p.channel = channel;
  p.lo_percentile = lo_percentile;
  p.hi_percentile = hi_percentile;
  p.lo_value = quantile_sorted(v, lo_percentile);
  p.hi_value = quantile_sorted(v, hi_percentile);
  if (!(p.hi_value > p.lo_value)) throw DegenerateInput("fit_profile: degenerate profile (lo_value == hi_value)");
  if (channel == Channel::Cells) {
    double sum = 0.0;
    for (float x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (float x : v) ss += (x - mean) * (x - mean);
    p.reference = Gaussian{mean, std::sqrt(ss / static_cast<double>(v.size()))};
  }
  return p;
}

Frame apply_global(const Frame& frame, const NormalizationProfile& profile) {
  if (!(profile.hi_value > profile.lo_value)) throw DegenerateInput("apply_global: degenerate profile");
  const double lo = profile.lo_value;
  const double inv = 1.0 / (profile.hi_value - profile.lo_value);
  Frame out = frame.like();
  auto src = frame.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::clamp((static_cast<double>(src[i]) - lo) * inv, 0.0, 1.0));
  }
  return out;
}

Frame match_histogram_gaussian(const Frame& frame, const Gaussian& reference) {
  if (!(reference.std > 0.0)) throw InvalidArgument("match_histogram_gaussian: reference std must be positive");
  const std::size_t n = frame.size();
  auto src = frame.pixels();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return src[a] < src[b]; });

  Frame out = frame.like();
  auto dst = out.pixels();
  if (src[order.front()] == src[order.back()]) {
    std::fill(dst.begin(), dst.end(), 0.5f);
    return out;
  }

  const boost::math::normal_distribution<double> dist(reference.mean, reference.std);
  // One output value per tie group, then rescale by the extreme groups.
  std::vector<double> mapped(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && src[order[j]] == src[order[i]]) ++j;
    const double u = (static_cast<double>(i) + 0.5 * static_cast<double>(j - i)) / static_cast<double>(n);
    const double q = boost::math::quantile(dist, u);
    for (std::size_t k = i; k < j; ++k) mapped[order[k]] = q;
    i = j;
  }
  const double qmin = mapped[order.front()];
  const double qmax = mapped[order.back()];
  const double inv = 1.0 / (qmax - qmin);
  for (std::size_t k = 0; k < n; ++k) dst[k] = static_cast<float>(std::clamp((mapped[k] - qmin) * inv, 0.0, 1.0));
  return out;
}

void save_profile(const std::filesystem::path& path, const NormalizationProfile& profile) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "channel" << YAML::Value << (profile.channel == Channel::Cells ? "cells" : "aggregates");
  e << YAML::Key << "lo_percentile" << YAML::Value << profile.lo_percentile;
  e << YAML::Key << "hi_percentile" << YAML::Value << profile.hi_percentile;
  e << YAML::Key << "lo_value" << YAML::Value << profile.lo_value;
  e << YAML::Key << "hi_value" << YAML::Value << profile.hi_value;
  if (profile.reference) {
    e << YAML::Key << "reference" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mean" << YAML::Value << profile.reference->mean;
    e << YAML::Key << "std" << YAML::Value << profile.reference->std;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write profile '" + path.string() + "'");
  out << e.c_str() << "\n";
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

NormalizationProfile load_profile(const std::filesystem::path& path) {
  YAML::Node n;
  try {
    n = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& ex) {
    throw IoError("cannot read profile '" + path.string() + "': " + ex.what());
  }
  try {
    NormalizationProfile p;
    const auto ch = n["channel"].as<std::string>();
    if (ch == "cells") {
      p.channel = Channel::Cells;
    } else if (ch == "aggregates") {
      p.channel = Channel::Aggregates;
    } else {
      throw IoError("profile '" + path.string() + "': unknown channel '" + ch + "'");
    }
    p.lo_percentile = n["lo_percentile"].as<double>();
    p.hi_percentile = n["hi_percentile"].as<double>();
    p.lo_value = n["lo_value"].as<double>();
    p.hi_value = n["hi_value"].as<double>();
    if (n["reference"]) p.reference = Gaussian{n["reference"]["mean"].as<double>(), n["reference"]["std"].as<double>()};
    return p;
  } catch (const YAML::Exception& ex) {
    throw IoError("malformed profile '" + path.string() + "': " + ex.what());
  }
}

}  // namespace phagoq::normalize
