#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/normalize/normalize.hpp"
#include "tempdir.hpp"

using namespace phagoq;
using normalize::Channel;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Sup distance between the empirical CDF of `sample` and `cdf`.
template <typename F>
double ks_distance(std::vector<double> sample, F cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double c = cdf(sample[i]);
    d = std::max({d, std::abs((i + 1) / n - c), std::abs(i / n - c)});
  }
  return d;
}

}  // namespace

TEST_SUITE("normalize") {
  TEST_CASE("quantile interpolates between order statistics") {
    const std::vector<float> v = {3, 1, 2, 4};
    CHECK(normalize::quantile(v, 0.0) == 1.0);
    CHECK(normalize::quantile(v, 1.0) == 4.0);
    CHECK(normalize::quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(normalize::quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK_THROWS_AS(normalize::quantile(v, 1.5), InvalidArgument);
    CHECK_THROWS_AS(normalize::quantile(std::vector<float>{}, 0.5), InvalidArgument);
  }

  TEST_CASE("fit_profile on a 16-bit ramp for cells") {
    Frame ramp(256, 256);
    for (int i = 0; i < 65536; ++i) ramp.pixels()[i] = static_cast<float>(i / 65535.0);
    const auto p = normalize::fit_profile(ramp, Channel::Cells);
    CHECK(p.lo_value == 0.0);
    CHECK(p.hi_value == 1.0);
    REQUIRE(p.reference.has_value());
    CHECK(p.reference->mean == doctest::Approx(0.5).epsilon(1e-6));
    // Discrete uniform on 65536 points of [0,1]: std ~ 1/sqrt(12).
    CHECK(p.reference->std == doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(1e-4));
  }

  TEST_CASE("fit_profile aggregates percentiles on 1000 evenly spaced values") {
    // Values k/999 for k = 0..999, shuffled. Under linear interpolation the
    // q-quantile of this sample is exactly q.
    std::vector<float> vals(1000);
    for (int k = 0; k < 1000; ++k) vals[k] = static_cast<float>(k / 999.0);
    std::mt19937 rng(5);
    std::shuffle(vals.begin(), vals.end(), rng);
    Frame f(40, 25);
    std::copy(vals.begin(), vals.end(), f.pixels().begin());
    const auto p = normalize::fit_profile(f, Channel::Aggregates);
    CHECK(p.lo_percentile == 0.005);
    CHECK(p.hi_percentile == 0.995);
    CHECK(p.lo_value == doctest::Approx(0.005).epsilon(1e-6));
    CHECK(p.hi_value == doctest::Approx(0.995).epsilon(1e-6));
    CHECK_FALSE(p.reference.has_value());
  }

  TEST_CASE("fit_profile rejects constant frames and bad percentiles") {
    CHECK_THROWS_AS(normalize::fit_profile(Frame(8, 8, 0.3f), Channel::Aggregates), DegenerateInput);
    CHECK_THROWS_AS(normalize::fit_profile(Frame(8, 8, 0.3f), Channel::Cells), DegenerateInput);
    const Frame f = testing::random_frame(8, 8, 1);
    CHECK_THROWS_AS(normalize::fit_profile(f, Channel::Cells, 0.6, 0.4), InvalidArgument);
  }

  TEST_CASE("apply_global") {
    normalize::NormalizationProfile p;
    p.lo_value = 0.2f;
    p.hi_value = 0.6f;
    Frame f(5, 1);
    f.at(0, 0) = 0.2f;
    f.at(1, 0) = 0.6f;
    f.at(2, 0) = 0.9f;
    f.at(3, 0) = 0.05f;
    f.at(4, 0) = 0.35f;
    const Frame g = normalize::apply_global(f, p);
    CHECK(g.at(0, 0) == 0.0f);
    CHECK(g.at(1, 0) == 1.0f);
    CHECK(g.at(2, 0) == 1.0f);
    CHECK(g.at(3, 0) == 0.0f);
    CHECK(g.at(4, 0) == doctest::Approx((0.35 - 0.2) / 0.4).epsilon(1e-6));

    p.hi_value = p.lo_value;
    CHECK_THROWS_AS(normalize::apply_global(f, p), DegenerateInput);
  }

  TEST_CASE("apply_global is monotone and order independent") {
    const Frame f0 = testing::random_frame(64, 64, 10);
    const auto p = normalize::fit_profile(f0, Channel::Aggregates);
    Frame ramp(1000, 1);
    for (int i = 0; i < 1000; ++i) ramp.at(i, 0) = static_cast<float>(i / 999.0);
    const Frame g = normalize::apply_global(ramp, p);
    for (int i = 1; i < 1000; ++i) CHECK(g.at(i, 0) >= g.at(i - 1, 0));

    std::vector<Frame> frames;
    for (int t = 0; t < 6; ++t) frames.push_back(testing::random_frame(32, 32, 50 + t));
    std::vector<Frame> fwd, rev(6);
    for (const auto& f : frames) fwd.push_back(normalize::apply_global(f, p));
    for (int t = 5; t >= 0; --t) rev[t] = normalize::apply_global(frames[t], p);
    for (int t = 0; t < 6; ++t) CHECK(static_cast<const Raster<float>&>(fwd[t]) == rev[t]);
  }

  TEST_CASE("match_histogram_gaussian hand-computed tie cases") {
    const normalize::Gaussian ref{0.4, 0.1};
    const Frame c = normalize::match_histogram_gaussian(Frame(6, 6, 0.7f), ref);
    for (float v : c.pixels()) CHECK(v == 0.5f);

    // Half 0.2, half 0.8: midrank u = 0.25 / 0.75, symmetric quantiles, so
    // the rescaled values are exactly 0 and 1.
    Frame two(10, 10);
    for (int i = 0; i < 100; ++i) two.pixels()[i] = (i % 2 == 0) ? 0.2f : 0.8f;
    const Frame t = normalize::match_histogram_gaussian(two, ref);
    for (int i = 0; i < 100; ++i) CHECK(t.pixels()[i] == (i % 2 == 0 ? 0.0f : 1.0f));

    // Half a, quarter b, quarter c: u = 0.25, 0.625, 0.875.
    // Standard normal quantiles from tables: -0.6744898, 0.3186394, 1.1503494.
    Frame three(8, 8);
    for (int i = 0; i < 64; ++i) three.pixels()[i] = i < 32 ? 0.1f : (i < 48 ? 0.3f : 0.9f);
    const Frame m = normalize::match_histogram_gaussian(three, ref);
    const double mid = (0.3186394 + 0.6744898) / (1.1503494 + 0.6744898);
    CHECK(m.pixels()[0] == 0.0f);
    CHECK(m.pixels()[40] == doctest::Approx(mid).epsilon(1e-6));
    CHECK(m.pixels()[63] == 1.0f);

    CHECK_THROWS_AS(normalize::match_histogram_gaussian(two, {0.5, 0.0}), InvalidArgument);
  }

  TEST_CASE("match_histogram_gaussian preserves rank order exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Frame f = testing::random_frame(48, 40, 300 + seed);
      for (float& v : f.pixels()) v = std::round(v * 63.0f) / 63.0f;  // plenty of ties
      const Frame g = normalize::match_histogram_gaussian(f, {0.5, 0.2});
      std::vector<std::size_t> idx(f.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f.pixels()[a] < f.pixels()[b]; });
      for (std::size_t k = 1; k < idx.size(); ++k) {
        const float a_in = f.pixels()[idx[k - 1]], b_in = f.pixels()[idx[k]];
        const float a_out = g.pixels()[idx[k - 1]], b_out = g.pixels()[idx[k]];
        if (a_in == b_in) {
          CHECK(a_out == b_out);
        } else {
          CHECK(a_out < b_out);
        }
      }
    }
  }

  TEST_CASE("match_histogram_gaussian on reference-distributed input") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd(0.5, 0.08);
    Frame f(256, 256);
    for (float& v : f.pixels()) v = static_cast<float>(nd(rng));
    const Frame g = normalize::match_histogram_gaussian(f, {0.5, 0.08});

    // Output against the reference shape under the same min-max rescale.
    const double n = static_cast<double>(f.size());
    // Extreme midrank 0.5/n pushed through the inverse CDF, by bisection.
    const double zmin = [&] {
      double lo = -10, hi = 0, target = 0.5 / n;
      for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        (normal_cdf(m) < target ? lo : hi) = m;
      }
      return lo;
    }();
    const double zmax = -zmin;
    std::vector<double> out(g.pixels().begin(), g.pixels().end());
    const double d_ref = ks_distance(out, [&](double x) { return normal_cdf(zmin + x * (zmax - zmin)); });
    CHECK(d_ref < 0.02);

    // Output is close to an affine image of the input. A min-max rescale of
    // the input hinges on its two extreme samples, so compare by correlation.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = f.pixels()[i], y = g.pixels()[i];
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double cov = sxy / n - sx * sy / (n * n);
    const double r = cov / std::sqrt((sxx / n - sx * sx / (n * n)) * (syy / n - sy * sy / (n * n)));
    CHECK(r > 0.999);
  }

  TEST_CASE("profile persistence round trip") {
    testing::TempDir dir("norm");
    const auto cells = normalize::fit_profile(testing::random_frame(30, 30, 4), Channel::Cells);
    const auto agg = normalize::fit_profile(testing::random_frame(30, 30, 5), Channel::Aggregates);
    normalize::save_profile(dir / "c.yaml", cells);
    normalize::save_profile(dir / "a.yaml", agg);
    CHECK(normalize::load_profile(dir / "c.yaml") == cells);
    CHECK(normalize::load_profile(dir / "a.yaml") == agg);
    CHECK_THROWS_AS(normalize::load_profile(dir / "missing.yaml"), IoError);
  }
}
