#include <cmath>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/registration/ecc.hpp"
#include "phagoq/registration/harness.hpp"
#include "phagoq/registration/sequence.hpp"
#include "tempdir.hpp"

using namespace phagoq;
using namespace phagoq::registration;

namespace {

Frame crop(const Frame& f, int x0, int y0, int w, int h) {
  Frame out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = f.at(x0 + x, y0 + y);
  return out;
}

// Two views of one larger scene, the second displaced by (dx, dy); both are
// fully populated, unlike a zero-filled warp.
std::pair<Frame, Frame> view_pair(int size, double dx, double dy, std::uint64_t seed) {
  const int margin = 24;
  const Frame canvas = testing::blob_frame(size + 2 * margin, size + 2 * margin, size / 2, seed);
  return {crop(canvas, margin, margin, size, size),
          crop(warp_translate(canvas, dx, dy), margin, margin, size, size)};
}

}  // namespace

TEST_SUITE("registration") {
  TEST_CASE("schedule validation") {
    CascadeSchedule s;
    CHECK_NOTHROW(s.validate());
    s.stages = {0};
    CHECK_NOTHROW(s.validate());
    s.stages = {65, 129, 0};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.stages = {65, 33};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.stages = {64, 0};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.stages = {};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }

  TEST_CASE("valid_after_warp") {
    CHECK(valid_after_warp(10, 8, 0, 0) == Rect{0, 0, 10, 8});
    CHECK(valid_after_warp(10, 8, 2, -3) == Rect{2, 0, 8, 5});
    CHECK(valid_after_warp(10, 8, 1.5, 0) == Rect{2, 0, 8, 8});
    CHECK(valid_after_warp(10, 8, -1.5, 0) == Rect{0, 0, 8, 8});
    CHECK_THROWS_AS(valid_after_warp(10, 8, 12, 0), InvalidArgument);
    // Every pixel inside the rectangle reproduces the source exactly for
    // integer shifts.
    const Frame f = testing::random_frame(12, 9, 3);
    const Frame g = warp_translate(f, 3, 2);
    const Rect r = valid_after_warp(12, 9, 3, 2);
    for (int y = r.y0; y < r.y0 + r.height; ++y)
      for (int x = r.x0; x < r.x0 + r.width; ++x) CHECK(g.at(x, y) == f.at(x - 3, y - 2));
  }

  TEST_CASE("identity pair") {
    const Frame f = testing::blob_frame(96, 96, 40, 5);
    const WarpEstimate e = ecc_translate(f, f);
    CHECK(e.converged);
    CHECK(std::abs(e.dx) < 1e-6);
    CHECK(std::abs(e.dy) < 1e-6);
    CHECK(e.rho == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("smooth sub-pixel warp is recovered") {
    const Frame f = testing::smooth_frame(128, 128, 11, 40.0);
    const Frame m = warp_translate(f, 3.0, -2.0);
    const Rect valid = valid_after_warp(128, 128, 3.0, -2.0);
    const EccImage ref = prepare(f, GaussianSpec::none());
    const EccImage mov = prepare(m, GaussianSpec::none(), valid);
    const WarpEstimate e = ecc_translate(ref, mov, 0, 0, {});
    CHECK(e.converged);
    CHECK(std::abs(e.dx - 3.0) < 0.05);
    CHECK(std::abs(e.dy + 2.0) < 0.05);
    CHECK(std::abs(e.rho) <= 1.0 + 1e-9);
    CHECK(e.iterations <= EccOptions{}.max_iterations);
  }

  TEST_CASE("large shift without smoothing does not converge to the truth") {
    const Frame f = testing::blob_frame(200, 200, 60, 12);
    const double d = 0.3 * 200;
    const Frame m = warp_translate(f, d, 0.0);
    const WarpEstimate e = ecc_translate(prepare(f, GaussianSpec::none()),
                                         prepare(m, GaussianSpec::none(), valid_after_warp(200, 200, d, 0)), 0, 0, {});
    CHECK((!e.converged || std::hypot(e.dx - d, e.dy) > 10.0));
  }

  TEST_CASE("single unsmoothed stage equals plain ECC") {
    const auto [a, b] = view_pair(96, 1.7, -0.6, 21);
    CascadeSchedule s;
    s.stages = {0};
    const CascadeEstimate c = cecc(a, b, s);
    const WarpEstimate e = ecc_translate(a, b, 0, 0, s.ecc);
    CHECK(c.final.dx == e.dx);
    CHECK(c.final.dy == e.dy);
    CHECK(c.final.rho == e.rho);
    CHECK(c.final.iterations == e.iterations);
    CHECK(c.stages.size() == 1);
  }

  TEST_CASE("zero shift stays at zero through every stage") {
    const Frame f = testing::blob_frame(128, 128, 50, 8);
    const CascadeEstimate c = cecc(f, f);
    REQUIRE(c.stages.size() == kDefaultStages.size());
    for (const auto& st : c.stages) {
      CHECK(std::abs(st.estimate.dx) < 1e-6);
      CHECK(std::abs(st.estimate.dy) < 1e-6);
    }
  }

  TEST_CASE("estimates are antisymmetric") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (int i = 0; i < 8; ++i) {
      const double dx = u(rng), dy = u(rng);
      const auto [a, b] = view_pair(128, dx, dy, 100 + i);
      CascadeSchedule s;
      s.stages = {33, 0};
      const WarpEstimate fwd = cecc(a, b, s).final;
      const WarpEstimate bwd = cecc(b, a, s).final;
      REQUIRE(fwd.converged);
      REQUIRE(bwd.converged);
      CHECK(std::abs(fwd.dx + bwd.dx) < 0.05);
      CHECK(std::abs(fwd.dy + bwd.dy) < 0.05);
      CHECK(std::abs(fwd.dx - dx) < 0.05);
      CHECK(std::abs(fwd.dy - dy) < 0.05);
    }
  }

  TEST_CASE("rho never decreases across accepted steps") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-15.0, 15.0);
    for (int i = 0; i < 12; ++i) {
      const auto [a, b] = view_pair(96, u(rng), u(rng), 300 + i);
      const CascadeEstimate c = cecc(a, b, CascadeSchedule{{65, 17, 0}, {}});
      for (const auto& st : c.stages) {
        const auto& tr = st.estimate.rho_trace;
        for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr[k] >= tr[k - 1]);
        for (double r : tr) CHECK(std::abs(r) <= 1.0 + 1e-9);
      }
    }
  }

  TEST_CASE("degenerate and mismatched input") {
    CHECK_THROWS_AS(ecc_translate(Frame(32, 32, 0.4f), testing::random_frame(32, 32, 1)), DegenerateInput);
    CHECK_THROWS_AS(ecc_translate(Frame(32, 32), Frame(32, 31)), InvalidArgument);
    CHECK_THROWS_AS(cecc(Frame(32, 32, 0.4f), Frame(32, 32, 0.4f)), DegenerateInput);
  }

  TEST_CASE("kernel tables agree on the estimate") {
    const auto [a, b] = view_pair(128, 2.3, -4.1, 55);
    CascadeSchedule s;
    s.stages = {65, 0};
    const auto* v = simd::avx2_kernels();
    const auto& vec = v != nullptr ? *v : simd::scalar_kernels();
    const WarpEstimate e1 = cecc(a, b, s, simd::scalar_kernels()).final;
    const WarpEstimate e2 = cecc(a, b, s, vec).final;
    CHECK(std::abs(e1.dx - e2.dx) < 1e-4);
    CHECK(std::abs(e1.dy - e2.dy) < 1e-4);
  }

  TEST_CASE("register_sequence on a static sequence") {
    const Frame f = testing::blob_frame(96, 96, 40, 17);
    std::vector<Frame> frames(6, f);
    RegistrationOptions opt;
    opt.schedule.stages = {33, 0};
    const RegisteredStack r = register_sequence(frames, opt);
    REQUIRE(r.trace.rows.size() == 6);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(r.trace.rows[t].t == static_cast<int>(t));
      CHECK(std::abs(r.trace.rows[t].dx_cum) < 1e-6);
      CHECK(std::abs(r.trace.rows[t].dy_cum) < 1e-6);
      CHECK_FALSE(r.trace.rows[t].flagged);
      CHECK(static_cast<const Raster<float>&>(r.aligned[t]) == f);
    }
    CHECK_THROWS_AS(register_sequence(std::vector<Frame>{}, opt), InvalidArgument);
  }

  TEST_CASE("register_sequence accumulates a persistent jump") {
    const int size = 128, margin = 20;
    const Frame canvas = testing::blob_frame(size + 2 * margin, size + 2 * margin, 80, 23);
    const Frame base = crop(canvas, margin, margin, size, size);
    const Frame jumped = crop(warp_translate(canvas, 10, 0), margin, margin, size, size);
    std::vector<Frame> frames;
    for (int t = 0; t < 8; ++t) frames.push_back(t < 5 ? base : jumped);
    for (Anchor anchor : {Anchor::PreviousFrame, Anchor::FirstFrame}) {
      RegistrationOptions opt;
      opt.anchor = anchor;
      opt.schedule.stages = {65, 17, 0};
      const RegisteredStack r = register_sequence(frames, opt);
      for (int t = 0; t < 8; ++t) {
        const auto& row = r.trace.rows[t];
        CHECK(std::abs(row.dx_cum - (t >= 5 ? 10.0 : 0.0)) < 0.05);
        CHECK(std::abs(row.dy_cum) < 0.05);
        CHECK(std::abs(row.dx_pairwise - (t == 5 ? 10.0 : 0.0)) < 0.05);
      }
      CHECK(r.trace.max_abs_shift() == doctest::Approx(10.0).epsilon(0.01));
      // Aligned frames match frame 0 away from the band the shift exposed.
      for (int t = 5; t < 8; ++t) {
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size - 12; ++x) CHECK(std::abs(r.aligned[t].at(x, y) - base.at(x, y)) < 0.02f);
      }
    }
  }

  TEST_CASE("failed estimates pass through flagged") {
    std::vector<Frame> frames = {testing::blob_frame(64, 64, 20, 1), Frame(64, 64, 0.3f),
                                 testing::blob_frame(64, 64, 20, 1)};
    RegistrationOptions opt;
    opt.schedule.stages = {0};
    const RegisteredStack r = register_sequence(frames, opt);
    CHECK(r.trace.rows[1].flagged);
    CHECK(r.trace.rows[1].dx_cum == 0.0);
    CHECK(static_cast<const Raster<float>&>(r.aligned[1]) == frames[1]);
  }

  TEST_CASE("registration.csv round trip") {
    testing::TempDir dir("reg");
    RegistrationTrace tr;
    tr.rows.push_back(TraceRow{});
    TraceRow r;
    r.t = 1;
    r.dx_pairwise = 1.25;
    r.dy_pairwise = -0.125;
    r.dx_cum = 1.25;
    r.dy_cum = -0.125;
    r.rho = 0.987654321;
    r.iterations = 7;
    r.flagged = false;
    tr.rows.push_back(r);
    write_registration_csv(dir / "registration.csv", tr);
    const RegistrationTrace back = read_registration_csv(dir / "registration.csv");
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[1].dx_cum == 1.25);
    CHECK(back.rows[1].rho == doctest::Approx(0.987654321).epsilon(1e-12));
    CHECK(back.rows[1].iterations == 7);
    CHECK(back.rows[0].converged);
  }

  TEST_CASE("harness edge cases and determinism") {
    const Frame img = testing::blob_frame(160, 160, 60, 31);
    CascadeSchedule s;
    s.stages = {129, 33, 0};
    HarnessOptions o;
    o.max_shift = 30.0;
    o.trials = 0;
    CHECK(shift_eval_harness(img, o, s).trials.empty());

    o.trials = 3;
    o.max_shift = 0.0;
    for (const auto& t : shift_eval_harness(img, o, s).trials) {
      CHECK(std::abs(t.err_x()) < 1e-6);
      CHECK(std::abs(t.err_y()) < 1e-6);
    }

    o.trials = 8;
    o.max_shift = 30.0;
    o.seed = 5;
    const HarnessResult r1 = shift_eval_harness(img, o, s);
    o.workers = 3;
    const HarnessResult r2 = shift_eval_harness(img, o, s);
    for (std::size_t i = 0; i < r1.trials.size(); ++i) {
      CHECK(r1.trials[i].true_dx == r2.trials[i].true_dx);
      CHECK(r1.trials[i].est_dx == r2.trials[i].est_dx);
      CHECK(r1.trials[i].est_dy == r2.trials[i].est_dy);
      CHECK(std::abs(r1.trials[i].true_dx) <= 30.0);
    }
    CHECK(r1.x.mean_abs < 0.05);
    CHECK(r1.y.mean_abs < 0.05);

    o.max_shift = 0.45 * 160;
    CHECK_THROWS_AS(shift_eval_harness(img, o, s), InvalidArgument);
  }

  TEST_CASE("axis_stats") {
    const AxisStats s = axis_stats({1.0, -1.0, 2.0, -2.0});
    CHECK(s.mean_abs == 1.5);
    CHECK(s.mean_signed == 0.0);
    CHECK(s.std_abs == doctest::Approx(std::sqrt(1.0 / 3.0)));
  }
}
