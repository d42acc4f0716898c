#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/imgcore/ops.hpp"

using namespace phagoq;

namespace {

// Union-find over every adjacent foreground pair, then labels renumbered by
// first raster occurrence. Independent of the flood fill under test.
Raster<std::int32_t> union_find_labels(const BinaryMask& m, Connectivity c) {
  const int w = m.width();
  const int h = m.height();
  std::vector<int> parent(static_cast<std::size_t>(w * h));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
    return i;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (c == Connectivity::Four && dx != 0 && dy != 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || !m.at(nx, ny)) continue;
          unite(y * w + x, ny * w + nx);
        }
      }
    }
  }
  Raster<std::int32_t> out(w, h, 0);
  std::map<int, int> relabel;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      const int root = find(y * w + x);
      auto [it, inserted] = relabel.try_emplace(root, static_cast<int>(relabel.size()) + 1);
      out.at(x, y) = it->second;
    }
  }
  return out;
}

double total(const Raster<float>& f) {
  double s = 0.0;
  for (float v : f.pixels()) s += v;
  return s;
}

}  // namespace

TEST_SUITE("imgcore") {
  TEST_CASE("gaussian_sigma follows the kernel-size formula") {
    CHECK(gaussian_sigma(513) == doctest::Approx(77.3).epsilon(1e-12));
    CHECK(gaussian_sigma(257) == doctest::Approx(38.9).epsilon(1e-12));
    CHECK(gaussian_sigma(3) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_THROWS_AS(gaussian_sigma(4), InvalidArgument);
    CHECK_THROWS_AS(gaussian_sigma(1), InvalidArgument);
    CHECK_THROWS_AS(gaussian_sigma(0), InvalidArgument);
  }

  TEST_CASE("border_index folds under both modes") {
    CHECK(border_index(-1, 5, BorderMode::Reflect) == 0);
    CHECK(border_index(-2, 5, BorderMode::Reflect) == 1);
    CHECK(border_index(5, 5, BorderMode::Reflect) == 4);
    CHECK(border_index(6, 5, BorderMode::Reflect) == 3);
    CHECK(border_index(12, 5, BorderMode::Reflect) == 2);  // two folds
    CHECK(border_index(-7, 5, BorderMode::Reflect) == 3);
    CHECK(border_index(-3, 5, BorderMode::Replicate) == 0);
    CHECK(border_index(9, 5, BorderMode::Replicate) == 4);
  }

  TEST_CASE("gaussian_smooth: constant frame stays constant") {
    Frame f(37, 23, 0.42f);
    for (int k : {3, 9, 65}) {
      const Frame g = gaussian_smooth(f, GaussianSpec::from_kernel_size(k));
      for (float v : g.pixels()) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
    }
  }

  TEST_CASE("gaussian_smooth: kernel 0 is the identity") {
    const Frame f = testing::random_frame(16, 9, 3);
    const Frame g = gaussian_smooth(f, GaussianSpec::none());
    CHECK(g.pixels().size() == f.pixels().size());
    CHECK(std::equal(f.pixels().begin(), f.pixels().end(), g.pixels().begin()));
  }

  TEST_CASE("gaussian_smooth: impulse response is the sampled Gaussian") {
    Frame f(11, 11, 0.0f);
    f.at(5, 5) = 1.0f;
    const Frame g = gaussian_smooth(f, GaussianSpec::from_kernel_size(5));
    // Oracle: direct evaluation of the 2-D kernel.
    const double sigma = 0.3 * ((5 - 1) * 0.5 - 1) + 0.8;
    double z = 0.0;
    for (int i = -2; i <= 2; ++i) z += std::exp(-i * i / (2 * sigma * sigma));
    for (int y = 0; y < 11; ++y) {
      for (int x = 0; x < 11; ++x) {
        const int dx = x - 5;
        const int dy = y - 5;
        double expected = 0.0;
        if (std::abs(dx) <= 2 && std::abs(dy) <= 2) {
          expected = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (z * z);
        }
        CHECK(g.at(x, y) == doctest::Approx(expected).epsilon(1e-5));
      }
    }
    CHECK(total(g) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("gaussian_smooth preserves total intensity under reflection") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      std::mt19937_64 rng(seed);
      const int w = 5 + static_cast<int>(rng() % 40);
      const int h = 5 + static_cast<int>(rng() % 40);
      const int k = 3 + 2 * static_cast<int>(rng() % 40);  // often wider than the frame
      const Frame f = testing::random_frame(w, h, seed);
      const Frame g = gaussian_smooth(f, GaussianSpec::from_kernel_size(k));
      CHECK(total(g) == doctest::Approx(total(f)).epsilon(1e-5));
    }
  }

  TEST_CASE("laplacian5 stencil cases") {
    Frame c(7, 6, 0.3f);
    const Field lc = laplacian5(c);
    for (float v : lc.pixels()) CHECK(std::abs(v) < 1e-6f);

    Frame ramp(9, 7);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) ramp.at(x, y) = 0.1f * static_cast<float>(x);
    const Field lr = laplacian5(ramp);
    for (int y = 1; y < 6; ++y)
      for (int x = 1; x < 8; ++x) CHECK(std::abs(lr.at(x, y)) < 1e-6f);

    Frame imp(5, 5, 0.0f);
    imp.at(2, 2) = 1.0f;
    const Field li = laplacian5(imp);
    CHECK(li.at(2, 2) == -4.0f);
    CHECK(li.at(1, 2) == 1.0f);
    CHECK(li.at(3, 2) == 1.0f);
    CHECK(li.at(2, 1) == 1.0f);
    CHECK(li.at(2, 3) == 1.0f);
    CHECK(li.at(1, 1) == 0.0f);
    CHECK(li.at(0, 0) == 0.0f);

    CHECK_THROWS_AS(laplacian5(Frame(2, 5)), InvalidArgument);
  }

  TEST_CASE("warp_translate basic cases") {
    const Frame f = testing::random_frame(12, 10, 5);
    const Frame same = warp_translate(f, 0.0, 0.0);
    CHECK(std::equal(f.pixels().begin(), f.pixels().end(), same.pixels().begin()));

    Frame imp(20, 20, 0.0f);
    imp.at(7, 9) = 1.0f;
    const Frame moved = warp_translate(imp, 5.0, -3.0);
    CHECK(moved.at(12, 6) == 1.0f);
    CHECK(total(moved) == doctest::Approx(1.0));

    Frame step(4, 1);
    step.at(0, 0) = 0.0f;
    step.at(1, 0) = 0.0f;
    step.at(2, 0) = 1.0f;
    step.at(3, 0) = 1.0f;
    const Frame half = warp_translate(step, 0.5, 0.0);
    CHECK(half.at(2, 0) == doctest::Approx(0.5f));
    CHECK(half.at(3, 0) == doctest::Approx(1.0f));
    CHECK(half.at(1, 0) == doctest::Approx(0.0f));
    CHECK(half.at(0, 0) == doctest::Approx(0.0f));  // reads outside the frame

    CHECK_THROWS_AS(warp_translate(f, std::nan(""), 0.0), InvalidArgument);
  }

  TEST_CASE("warp_translate round trip on smooth frames") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Frame f = testing::smooth_frame(96, 80, seed);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-6.0, 6.0);
      const double dx = u(rng);
      const double dy = u(rng);
      const Frame back = warp_translate(warp_translate(f, dx, dy), -dx, -dy);
      const int mx = static_cast<int>(std::ceil(std::abs(dx))) + 1;
      const int my = static_cast<int>(std::ceil(std::abs(dy))) + 1;
      float worst = 0.0f;
      for (int y = my; y < f.height() - my; ++y)
        for (int x = mx; x < f.width() - mx; ++x) worst = std::max(worst, std::abs(back.at(x, y) - f.at(x, y)));
      CHECK(worst < 1e-3f);
    }
  }

  TEST_CASE("resize_half block means") {
    Frame c(8, 6, 0.7f);
    const Frame rc = resize_half(c);
    CHECK(rc.width() == 4);
    CHECK(rc.height() == 3);
    for (float v : rc.pixels()) CHECK(v == doctest::Approx(0.7f));

    Frame two(2, 2);
    two.at(0, 0) = 0.0f;
    two.at(1, 0) = 1.0f;
    two.at(0, 1) = 1.0f;
    two.at(1, 1) = 0.0f;
    CHECK(resize_half(two).at(0, 0) == doctest::Approx(0.5f));

    Frame checker(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) checker.at(x, y) = static_cast<float>((x + y) % 2);
    const Frame rchk = resize_half(checker);
    for (float v : rchk.pixels()) CHECK(v == doctest::Approx(0.5f));

    const Frame r = testing::random_frame(64, 32, 17);
    CHECK(total(resize_half(r)) / 512.0 == doctest::Approx(total(r) / 2048.0).epsilon(1e-6));
    CHECK_THROWS_AS(resize_half(Frame(5, 4)), InvalidArgument);
  }

  TEST_CASE("label_components fixed cases") {
    BinaryMask empty(6, 6, 0);
    CHECK(label_components(empty).max_label == 0);

    BinaryMask squares(10, 10, 0);
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) squares.at(x, y) = 1;
    for (int y = 5; y < 8; ++y)
      for (int x = 6; x < 9; ++x) squares.at(x, y) = 1;
    CHECK(label_components(squares, Connectivity::Four).max_label == 2);
    CHECK(label_components(squares, Connectivity::Eight).max_label == 2);

    BinaryMask diag(4, 4, 0);
    diag.at(1, 1) = 1;
    diag.at(2, 2) = 1;
    CHECK(label_components(diag, Connectivity::Four).max_label == 2);
    CHECK(label_components(diag, Connectivity::Eight).max_label == 1);
  }

  TEST_CASE("label_components equals a union-find oracle on random masks") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::mt19937_64 rng(seed);
      const int w = 1 + static_cast<int>(rng() % 32);
      const int h = 1 + static_cast<int>(rng() % 32);
      const double density = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
      const BinaryMask m = testing::random_mask(w, h, density, seed);
      for (auto c : {Connectivity::Four, Connectivity::Eight}) {
        const LabelMap got = label_components(m, c);
        const auto want = union_find_labels(m, c);
        REQUIRE(got.labels == want);
        std::int32_t mx = 0;
        for (auto v : want.pixels()) mx = std::max(mx, v);
        CHECK(got.max_label == mx);
      }
    }
  }

  TEST_CASE("region_features fixed cases") {
    BinaryMask sq(6, 6, 0);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) sq.at(x, y) = 1;
    auto f = region_features(label_components(sq));
    REQUIRE(f.size() == 1);
    CHECK(f[0].area_px == 9);
    CHECK(f[0].centroid.x == doctest::Approx(1.0));
    CHECK(f[0].centroid.y == doctest::Approx(1.0));

    CHECK(region_features(label_components(BinaryMask(4, 4, 0))).empty());

    BinaryMask ell(4, 4, 0);
    ell.at(0, 0) = 1;
    ell.at(1, 0) = 1;
    ell.at(0, 1) = 1;
    auto g = region_features(label_components(ell));
    REQUIRE(g.size() == 1);
    CHECK(g[0].area_px == 3);
    CHECK(g[0].centroid.x == doctest::Approx(1.0 / 3.0));
    CHECK(g[0].centroid.y == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("region areas sum to the foreground count") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const BinaryMask m = testing::random_mask(31, 17, 0.45, seed);
      const LabelMap lm = label_components(m);
      std::int64_t fg = 0;
      for (auto v : m.pixels()) fg += v;
      std::int64_t sum = 0;
      for (const auto& r : region_features(lm)) {
        sum += r.area_px;
        CHECK(r.area_px >= 1);
      }
      CHECK(sum == fg);
    }
  }

  TEST_CASE("distance_transform equals brute force") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const BinaryMask m = testing::random_mask(19, 13, 0.85, seed);
      const auto d = distance_transform(m);
      for (int y = 0; y < 13; ++y) {
        for (int x = 0; x < 19; ++x) {
          double best = m.at(x, y) ? 1e9 : 0.0;
          if (m.at(x, y)) {
            for (int yy = 0; yy < 13; ++yy)
              for (int xx = 0; xx < 19; ++xx)
                if (!m.at(xx, yy)) best = std::min(best, std::hypot(xx - x, yy - y));
          }
          if (best < 1e8) CHECK(d.at(x, y) == doctest::Approx(best).epsilon(1e-6));
        }
      }
    }
  }

  TEST_CASE("dilate_cross grows by the 4-neighbourhood") {
    BinaryMask m(7, 7, 0);
    m.at(3, 3) = 1;
    const auto d1 = dilate_cross(m, 1);
    int count = 0;
    for (auto v : d1.pixels()) count += v;
    CHECK(count == 5);
    const auto d2 = dilate_cross(m, 2);
    count = 0;
    for (auto v : d2.pixels()) count += v;
    CHECK(count == 13);  // diamond of radius 2
  }

  TEST_CASE("otsu separates a bimodal frame") {
    Frame f(20, 20, 0.1f);
    for (int y = 5; y < 12; ++y)
      for (int x = 5; x < 12; ++x) f.at(x, y) = 0.8f;
    const float t = otsu_threshold(f);
    CHECK(t > 0.1f);
    CHECK(t < 0.8f);
    CHECK(otsu_threshold(Frame(8, 8, 0.3f)) >= 1.0f);
  }
}
