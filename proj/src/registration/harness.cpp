#include "phagoq/registration/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "phagoq/util/csv.hpp"

namespace phagoq::registration {

AxisStats axis_stats(const std::vector<double>& errors) {
  AxisStats s;
  if (errors.empty()) return s;
  const double n = static_cast<double>(errors.size());
  double sum_abs = 0.0, sum_signed = 0.0;
  for (double e : errors) {
    sum_abs += std::abs(e);
    sum_signed += e;
  }
  s.mean_abs = sum_abs / n;
  s.mean_signed = sum_signed / n;
  if (errors.size() > 1) {
    double ss = 0.0;
    for (double e : errors) ss += (std::abs(e) - s.mean_abs) * (std::abs(e) - s.mean_abs);
    s.std_abs = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

HarnessResult shift_eval_harness(const Frame& image, const HarnessOptions& options, const CascadeSchedule& schedule) {
  schedule.validate();
  if (options.trials < 0) throw InvalidArgument("trials must be >= 0");
  if (options.workers < 1) throw InvalidArgument("workers must be >= 1");
  const double limit = 0.45 * std::min(image.width(), image.height());
  if (!(options.max_shift >= 0.0 && options.max_shift < limit)) {
    throw InvalidArgument("max_shift must lie in [0, 0.45 * min(width, height))");
  }

  HarnessResult result;
  result.trials.resize(static_cast<std::size_t>(options.trials));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> shift(-options.max_shift, options.max_shift);
  for (auto& t : result.trials) {
    t.true_dx = options.max_shift > 0 ? shift(rng) : 0.0;
    t.true_dy = options.max_shift > 0 ? shift(rng) : 0.0;
  }

  const auto start = std::chrono::steady_clock::now();
  const Pyramid reference = prepare_pyramid(image, schedule);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.trials.size()) return;
      HarnessTrial& t = result.trials[i];
      const auto t0 = std::chrono::steady_clock::now();
      const Frame moving = warp_translate(image, t.true_dx, t.true_dy);
      const Rect valid = valid_after_warp(image.width(), image.height(), t.true_dx, t.true_dy);
      const CascadeEstimate e = cecc(reference, prepare_pyramid(moving, schedule, valid), schedule);
      t.est_dx = e.final.dx;
      t.est_dy = e.final.dy;
      t.rho = e.final.rho;
      t.converged = e.final.converged;
      t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n_threads = std::min(options.workers, std::max(1, options.trials));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  result.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::vector<double> ex, ey;
  for (const auto& t : result.trials) {
    ex.push_back(t.err_x());
    ey.push_back(t.err_y());
  }
  result.x = axis_stats(ex);
  result.y = axis_stats(ey);
  return result;
}

void write_harness_csv(const std::filesystem::path& path, const HarnessResult& result) {
  csv::Writer w(path, {"trial", "true_dx", "true_dy", "est_dx", "est_dy", "err_x", "err_y", "rho", "converged",
                       "seconds"});
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    w.row({csv::num(i), csv::num(t.true_dx, 9), csv::num(t.true_dy, 9), csv::num(t.est_dx, 9), csv::num(t.est_dy, 9),
           csv::num(t.err_x(), 6), csv::num(t.err_y(), 6), csv::num(t.rho, 9), csv::flag(t.converged),
           csv::num(t.seconds, 4)});
  }
  w.close();
  csv::Writer s(path.parent_path() / (path.stem().string() + "_summary.csv"),
                {"axis", "mean_abs_error", "std_abs_error", "mean_signed_error", "trials", "total_seconds"});
  const auto n = csv::num(result.trials.size());
  s.row({"x", csv::num(result.x.mean_abs), csv::num(result.x.std_abs), csv::num(result.x.mean_signed), n,
         csv::num(result.total_seconds, 4)});
  s.row({"y", csv::num(result.y.mean_abs), csv::num(result.y.std_abs), csv::num(result.y.mean_signed), n,
         csv::num(result.total_seconds, 4)});
  s.close();
}

}  // namespace phagoq::registration
