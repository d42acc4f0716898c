#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phagoq::report {

enum class Metric {
  EatenArea,          // um^2
  CellCount,
  MeanCellArea,       // um^2
  EatenPerCell,       // eaten_area / cell_count
  EatenPerCellArea,   // eaten_area / total cell area
  TotalMovement,      // um
  MeanSpeed,          // um/min
};
inline constexpr std::size_t kMetricCount = 7;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::EatenArea,     Metric::CellCount,     Metric::MeanCellArea, Metric::EatenPerCell,
    Metric::EatenPerCellArea, Metric::TotalMovement, Metric::MeanSpeed};

std::string_view metric_name(Metric m);

using MetricValues = std::array<double, kMetricCount>;

// One scene's curves on the condition's time grid. NaN marks an undefined
// value (e.g. a ratio with no cells).
struct SceneCurves {
  std::string scene;
  std::string acquisition;  // scenes sharing an acquisition are averaged first; empty means the scene itself
  std::array<std::vector<double>, kMetricCount> values;

  const std::vector<double>& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  std::vector<double>& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
};

struct ConditionCurves {
  std::string name;
  std::vector<double> time_min;  // common grid, strictly increasing
  std::vector<SceneCurves> scenes;

  // Throws InvalidArgument on an empty condition or a curve off the grid.
  void validate() const;
};

struct AcquisitionSummary {
  std::string acquisition;
  int scenes = 0;
  MetricValues mean{};  // window mean of the acquisition's scene-mean curve
};

struct Window {
  double begin_min = 0.0;
  double end_min = 200.0;
};

// Grid points inside [begin, end] (inclusive) are averaged; NaN samples are
// skipped. A window reaching past the recording uses the recorded part.
// Throws InvalidArgument when no grid point falls inside.
std::vector<AcquisitionSummary> condition_summary(const ConditionCurves& curves, Window window = {});

// Mean over scenes at each grid point, NaN-skipping.
std::array<std::vector<double>, kMetricCount> scene_mean_curves(const ConditionCurves& curves);

enum class Significance { NotSignificant, P05, P01, P001 };
Significance significance(double p);
std::string_view significance_code(Significance s);  // ns, *, **, ***

struct ComparisonResult {
  std::string metric;
  double U = 0.0;  // for sample_a
  double p_value = 1.0;
  Significance code = Significance::NotSignificant;
  bool exact = false;
};

// Two-sided. Exact distribution when n_a + n_b <= 20 and there are no ties,
// otherwise normal approximation with tie and continuity correction.
// Throws InvalidArgument on an empty sample or non-finite values.
ComparisonResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b);

// P(U <= u) under H0 without ties, by counting rank arrangements.
double mann_whitney_exact_cdf(int n_a, int n_b, double u);

struct CompositeWeights {
  double alpha = 0.5;  // time
  double beta = 0.0;   // memory
  double gamma = 0.5;  // feature mse

  void validate() const;
};

struct ModelCost {
  std::string name;
  double time = 0.0;
  double memory = 0.0;
  double feature_mse = 0.0;
};

struct CompositeResult {
  std::vector<double> scores;  // higher is better
  std::size_t best = 0;        // first index of the maximum
};

// Every metric is min-max normalized and flipped (lower raw value is
// better). A metric equal across all models normalizes to 1.
CompositeResult composite_score(std::span<const ModelCost> models, const CompositeWeights& weights);

struct ReportOptions {
  Window window;
};

// Writes stats_report.csv, comparisons.csv, ratios.csv,
// per_acquisition.csv and time_courses.csv into out_dir.
// Throws UnsupportedConfiguration unless exactly two conditions are given.
std::vector<ComparisonResult> emit_report(std::span<const ConditionCurves> conditions,
                                          const std::filesystem::path& out_dir, const ReportOptions& options = {});

}  // namespace phagoq::report
