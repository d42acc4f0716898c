#include "phagoq/report/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "phagoq/error.hpp"
#include "phagoq/util/csv.hpp"

namespace phagoq::report {

namespace {

double nan_mean(std::span<const double> v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n ? s / n : std::nan("");
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return std::nan("");
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::EatenArea: return "eaten_area";
    case Metric::CellCount: return "cell_count";
    case Metric::MeanCellArea: return "mean_cell_area";
    case Metric::EatenPerCell: return "eaten_per_cell";
    case Metric::EatenPerCellArea: return "eaten_per_cell_area";
    case Metric::TotalMovement: return "total_movement";
    case Metric::MeanSpeed: return "mean_speed";
  }
  return "?";
}

void ConditionCurves::validate() const {
  if (scenes.empty()) throw InvalidArgument("condition " + name + " has no scenes");
  if (time_min.empty()) throw InvalidArgument("condition " + name + " has an empty time grid");
  for (std::size_t i = 1; i < time_min.size(); ++i) {
    if (!(time_min[i] > time_min[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
  }
  for (const auto& s : scenes) {
    for (const auto& v : s.values) {
      if (v.size() != time_min.size()) {
        throw InvalidArgument("scene " + s.scene + " curve length does not match the time grid");
      }
    }
  }
}

std::array<std::vector<double>, kMetricCount> scene_mean_curves(const ConditionCurves& curves) {
  curves.validate();
  std::array<std::vector<double>, kMetricCount> out;
  std::vector<double> column(curves.scenes.size());
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out[m].resize(curves.time_min.size());
    for (std::size_t i = 0; i < curves.time_min.size(); ++i) {
      for (std::size_t s = 0; s < curves.scenes.size(); ++s) column[s] = curves.scenes[s].values[m][i];
      out[m][i] = nan_mean(column);
    }
  }
  return out;
}

std::vector<AcquisitionSummary> condition_summary(const ConditionCurves& curves, Window window) {
  curves.validate();
  if (!(window.end_min >= window.begin_min)) throw InvalidArgument("window end precedes its begin");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curves.time_min.size(); ++i) {
    if (curves.time_min[i] >= window.begin_min && curves.time_min[i] <= window.end_min) idx.push_back(i);
  }
  if (idx.empty()) throw InvalidArgument("summary window contains no recorded time point");

  std::map<std::string, ConditionCurves> groups;
  for (const auto& s : curves.scenes) {
    const std::string key = s.acquisition.empty() ? s.scene : s.acquisition;
    auto& g = groups[key];
    g.name = key;
    g.time_min = curves.time_min;
    g.scenes.push_back(s);
  }
  std::vector<AcquisitionSummary> out;
  for (const auto& [key, g] : groups) {
    const auto mean = scene_mean_curves(g);
    AcquisitionSummary a;
    a.acquisition = key;
    a.scenes = static_cast<int>(g.scenes.size());
    std::vector<double> sel;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      sel.clear();
      for (std::size_t i : idx) sel.push_back(mean[m][i]);
      a.mean[m] = nan_mean(sel);
    }
    out.push_back(std::move(a));
  }
  return out;
}

Significance significance(double p) {
  if (p < 0.001) return Significance::P001;
  if (p < 0.01) return Significance::P01;
  if (p < 0.05) return Significance::P05;
  return Significance::NotSignificant;
}

std::string_view significance_code(Significance s) {
  switch (s) {
    case Significance::P001: return "***";
    case Significance::P01: return "**";
    case Significance::P05: return "*";
    case Significance::NotSignificant: return "ns";
  }
  return "ns";
}

double mann_whitney_exact_cdf(int n_a, int n_b, double u) {
  if (n_a < 1 || n_b < 1) throw InvalidArgument("sample sizes must be >= 1");
  const int max_u = n_a * n_b;
  if (u < 0) return 0.0;
  if (u >= max_u) return 1.0;
  // c[j][k]: arrangements of i items of a and j items of b with U = k, built up over i.
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n_b) + 1);
  for (int j = 0; j <= n_b; ++j) c[j].assign(static_cast<std::size_t>(max_u) + 1, 0.0), c[j][0] = 1.0;
  for (int i = 1; i <= n_a; ++i) {
    std::vector<std::vector<double>> next(c.size(), std::vector<double>(static_cast<std::size_t>(max_u) + 1, 0.0));
    next[0][0] = 1.0;
    for (int j = 1; j <= n_b; ++j) {
      for (int k = 0; k <= max_u; ++k) {
        // Largest item is from a (beats all j b's) or from b.
        double v = next[j - 1][k];
        if (k >= j) v += c[j][k - j];
        next[j][k] = v;
      }
    }
    c = std::move(next);
  }
  const auto& dist = c[n_b];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double le = 0.0;
  for (int k = 0; k <= static_cast<int>(std::floor(u)); ++k) le += dist[k];
  return le / total;
}

ComparisonResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("mann_whitney_u: both samples must be nonempty");
  struct Item {
    double v;
    bool from_a;
  };
  std::vector<Item> all;
  for (double v : a) all.push_back({v, true});
  for (double v : b) all.push_back({v, false});
  for (const auto& it : all) {
    if (!std::isfinite(it.v)) throw InvalidArgument("mann_whitney_u: non-finite value");
  }
  std::sort(all.begin(), all.end(), [](const Item& x, const Item& y) { return x.v < y.v; });

  const double n_a = static_cast<double>(a.size()), n_b = static_cast<double>(b.size());
  const double n = n_a + n_b;
  double rank_sum_a = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double t = static_cast<double>(j - i);
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].from_a) rank_sum_a += midrank;
    }
    i = j;
  }

  ComparisonResult r;
  r.U = rank_sum_a - n_a * (n_a + 1.0) / 2.0;
  const double mu = n_a * n_b / 2.0;
  if (!ties && a.size() + b.size() <= 20) {
    r.exact = true;
    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    const double lower = mann_whitney_exact_cdf(na, nb, r.U);
    const double upper = 1.0 - mann_whitney_exact_cdf(na, nb, r.U - 1.0);
    r.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
  } else {
    const double var = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
      r.p_value = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(r.U - mu) - 0.5) / std::sqrt(var);
      r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
  }
  r.code = significance(r.p_value);
  return r;
}

void CompositeWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw InvalidArgument("composite weights must be nonnegative");
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) throw InvalidArgument("composite weights must sum to 1");
}

CompositeResult composite_score(std::span<const ModelCost> models, const CompositeWeights& weights) {
  weights.validate();
  if (models.size() < 2) throw InvalidArgument("composite_score needs at least two models");
  auto normalized = [&](auto get) {
    double lo = get(models[0]), hi = lo;
    for (const auto& m : models) {
      lo = std::min(lo, get(m));
      hi = std::max(hi, get(m));
    }
    std::vector<double> out;
    for (const auto& m : models) out.push_back(hi > lo ? 1.0 - (get(m) - lo) / (hi - lo) : 1.0);
    return out;
  };
  const auto t = normalized([](const ModelCost& m) { return m.time; });
  const auto mem = normalized([](const ModelCost& m) { return m.memory; });
  const auto mse = normalized([](const ModelCost& m) { return m.feature_mse; });
  CompositeResult r;
  for (std::size_t i = 0; i < models.size(); ++i) {
    r.scores.push_back(weights.alpha * t[i] + weights.beta * mem[i] + weights.gamma * mse[i]);
    if (r.scores[i] > r.scores[r.best]) r.best = i;
  }
  return r;
}

std::vector<ComparisonResult> emit_report(std::span<const ConditionCurves> conditions,
                                          const std::filesystem::path& out_dir, const ReportOptions& options) {
  if (conditions.size() != 2) {
    throw UnsupportedConfiguration("statistical reporting supports exactly two conditions, got " +
                                   std::to_string(conditions.size()));
  }
  std::filesystem::create_directories(out_dir);
  std::array<std::vector<AcquisitionSummary>, 2> summary;
  for (int c = 0; c < 2; ++c) summary[c] = condition_summary(conditions[c], options.window);

  auto column = [&](int c, std::size_t m) {
    std::vector<double> v;
    for (const auto& a : summary[c]) v.push_back(a.mean[m]);
    return v;
  };

  {
    csv::Writer w(out_dir / "stats_report.csv", {"condition", "metric", "mean", "std", "n"});
    for (int c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        const auto v = column(c, m);
        w.row({conditions[c].name, std::string(metric_name(kAllMetrics[m])), csv::num(nan_mean(v)),
               csv::num(sample_std(v)), csv::num(v.size())});
      }
    }
    w.close();
  }

  std::vector<ComparisonResult> results;
  {
    csv::Writer w(out_dir / "comparisons.csv", {"metric", "U", "p", "code"});
    csv::Writer ratios(out_dir / "ratios.csv", {"metric", "condition_a", "condition_b", "mean_a", "mean_b", "ratio"});
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const auto va = column(0, m), vb = column(1, m);
      ComparisonResult r;
      const bool finite = std::all_of(va.begin(), va.end(), [](double x) { return std::isfinite(x); }) &&
                          std::all_of(vb.begin(), vb.end(), [](double x) { return std::isfinite(x); });
      if (finite) {
        r = mann_whitney_u(va, vb);
      } else {
        r.U = r.p_value = std::nan("");
      }
      r.metric = metric_name(kAllMetrics[m]);
      w.row({r.metric, csv::num(r.U), csv::num(r.p_value), finite ? std::string(significance_code(r.code)) : "na"});
      const double ma = nan_mean(va), mb = nan_mean(vb);
      ratios.row({r.metric, conditions[0].name, conditions[1].name, csv::num(ma), csv::num(mb), csv::num(mb / ma)});
      results.push_back(std::move(r));
    }
    w.close();
    ratios.close();
  }

  {
    std::vector<std::string> header = {"condition", "acquisition", "scenes"};
    for (Metric m : kAllMetrics) header.emplace_back(metric_name(m));
    csv::Writer w(out_dir / "per_acquisition.csv", header);
    for (int c = 0; c < 2; ++c) {
      for (const auto& a : summary[c]) {
        std::vector<std::string> row = {conditions[c].name, a.acquisition, csv::num(a.scenes)};
        for (double v : a.mean) row.push_back(csv::num(v));
        w.row(row);
      }
    }
    w.close();
  }

  {
    std::vector<std::string> header = {"condition", "time_min"};
    for (Metric m : kAllMetrics) header.emplace_back(metric_name(m));
    csv::Writer w(out_dir / "time_courses.csv", header);
    for (int c = 0; c < 2; ++c) {
      const auto mean = scene_mean_curves(conditions[c]);
      for (std::size_t i = 0; i < conditions[c].time_min.size(); ++i) {
        std::vector<std::string> row = {conditions[c].name, csv::num(conditions[c].time_min[i])};
        for (std::size_t m = 0; m < kMetricCount; ++m) row.push_back(csv::num(mean[m][i]));
        w.row(row);
      }
    }
    w.close();
  }
  return results;
}

}  // namespace phagoq::report
