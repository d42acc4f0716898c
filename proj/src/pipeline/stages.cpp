#include "phagoq/pipeline/stages.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "phagoq/ingest/image_io.hpp"
#include "phagoq/ingest/scheduler.hpp"
#include "phagoq/normalize/normalize.hpp"
#include "phagoq/pipeline/manifest.hpp"
#include "phagoq/util/csv.hpp"

namespace phagoq::pipeline {

namespace fs = std::filesystem;

namespace {

fs::path frame_file(const fs::path& dir, const char* sub, std::size_t t) {
  char name[32];
  std::snprintf(name, sizeof name, "t%04zu.tif", t);
  return dir / sub / name;
}

void require_file(const fs::path& p, Stage needed) {
  if (!fs::exists(p)) {
    throw IoError("missing " + p.string() + "; run the " + std::string(stage_name(needed)) + " stage first");
  }
}

std::vector<int> kept_frames(const fs::path& dir) {
  require_file(dir / "quality.csv", Stage::Qc);
  std::vector<int> kept;
  for (const auto& q : quality::read_quality_csv(dir / "quality.csv")) {
    if (!q.rejected) kept.push_back(q.t);
  }
  return kept;
}

registration::RegistrationTrace load_trace(const fs::path& dir, std::size_t frames) {
  require_file(dir / "registration.csv", Stage::Register);
  auto trace = registration::read_registration_csv(dir / "registration.csv");
  if (trace.rows.size() != frames) throw IoError("registration.csv in " + dir.string() + " does not cover every frame");
  return trace;
}

void normalize_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  if (scene.frame_count == 0) throw DegenerateInput("scene " + scene.key() + " has no frames");
  fs::create_directories(dir / "normalized" / "aggregates");
  fs::create_directories(dir / "normalized" / "cells");
  const auto agg = normalize::fit_profile(ingest::load_frame(scene, ingest::Channel::Aggregates, 0),
                                          normalize::Channel::Aggregates, cfg.normalize.aggregate_lo_percentile,
                                          cfg.normalize.aggregate_hi_percentile);
  const auto cells = normalize::fit_profile(ingest::load_frame(scene, ingest::Channel::Cells, 0), normalize::Channel::Cells);
  normalize::save_profile(dir / "profile_aggregates.yaml", agg);
  normalize::save_profile(dir / "profile_cells.yaml", cells);
  for (std::size_t t = 0; t < scene.frame_count; ++t) {
    const Frame a = normalize::apply_global(ingest::load_frame(scene, ingest::Channel::Aggregates, t), agg);
    io::write_tiff(frame_file(dir / "normalized", "aggregates", t), a, io::SampleFormat::U8);
    const Frame c = normalize::match_histogram_gaussian(
        normalize::apply_global(ingest::load_frame(scene, ingest::Channel::Cells, t), cells), *cells.reference);
    io::write_tiff(frame_file(dir / "normalized", "cells", t), c, io::SampleFormat::U8);
  }
}

void register_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  require_file(frame_file(dir / "normalized", "aggregates", 0), Stage::Normalize);
  fs::create_directories(dir / "aligned" / "aggregates");
  fs::create_directories(dir / "aligned" / "cells");
  registration::RegistrationOptions opts;
  opts.schedule = cfg.registration.schedule;
  opts.anchor = cfg.registration.anchor;
  const auto trace = registration::register_sequence(
      scene.frame_count, [&](std::size_t t) { return io::read_frame(frame_file(dir / "normalized", "aggregates", t)); },
      opts,
      [&](std::size_t t, const Frame& aligned) {
        io::write_tiff(frame_file(dir / "aligned", "aggregates", t), aligned, io::SampleFormat::U8);
      });
  registration::write_registration_csv(dir / "registration.csv", trace);
  for (std::size_t t = 0; t < scene.frame_count; ++t) {
    const Frame c = io::read_frame(frame_file(dir / "normalized", "cells", t));
    io::write_tiff(frame_file(dir / "aligned", "cells", t), registration::align_frame(c, trace.rows[t]),
                   io::SampleFormat::U8);
  }
}

void qc_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  require_file(frame_file(dir / "normalized", "aggregates", 0), Stage::Normalize);
  const auto trace = load_trace(dir, scene.frame_count);
  std::vector<double> lap(scene.frame_count);
  for (std::size_t t = 0; t < scene.frame_count; ++t) {
    lap[t] = quality::laplacian_variance(io::read_frame(frame_file(dir / "normalized", "aggregates", t)));
  }
  const auto blur = quality::detect_blur(lap, cfg.quality);
  const auto report = quality::quality_gate(trace, blur, cfg.quality, cfg.registration.shift_tolerance_px);
  quality::write_quality_csv(dir / "quality.csv", report);
  quality::write_scene_quality(dir / "quality_report.txt", report);
}

void aggregates_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  const auto kept = kept_frames(dir);
  const auto trace = load_trace(dir, scene.frame_count);
  std::vector<aggregates::FrameAggregates> frames;
  for (int t : kept) {
    const Frame f = io::read_frame(frame_file(dir / "normalized", "aggregates", static_cast<std::size_t>(t)));
    auto regions = region_features(aggregates::segment_aggregates(f, cfg.aggregates.segment));
    const auto& row = trace.rows[static_cast<std::size_t>(t)];
    for (auto& r : regions) {
      r.centroid.x -= row.dx_cum;
      r.centroid.y -= row.dy_cum;
    }
    frames.push_back({t, std::move(regions)});
  }
  const auto analysis = aggregates::analyze_aggregates(frames, scene.pixel_pitch_um, cfg.aggregates.events,
                                                       cfg.aggregates.max_match_dist_px);
  aggregates::write_aggregates_csv(dir / "aggregates.csv", analysis.records);
  aggregates::write_events_csv(dir / "events.csv", analysis.events);
  aggregates::write_curve_csv(dir / "eaten_curve.csv", analysis.curve);
}

void cells_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  const auto kept = kept_frames(dir);
  const auto trace = load_trace(dir, scene.frame_count);
  fs::create_directories(dir / "masks");
  auto probability = [&](int t) -> cellseg::ProbabilityMap {
    const auto& row = trace.rows[static_cast<std::size_t>(t)];
    if (scene.has_probability()) {
      return registration::align_field(ingest::load_frame(scene, ingest::Channel::Probability, static_cast<std::size_t>(t)),
                                       row);
    }
    return cellseg::threshold_fallback(io::read_frame(frame_file(dir / "aligned", "cells", static_cast<std::size_t>(t))));
  };
  const std::size_t W = static_cast<std::size_t>(cfg.cells.ttcm.window_W);
  std::deque<cellseg::ProbabilityMap> window;
  std::size_t loaded = 0;
  std::vector<cellseg::CellRow> rows;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    while (loaded < kept.size() && loaded < i + W) window.push_back(probability(kept[loaded++]));
    const std::vector<cellseg::ProbabilityMap> maps(window.begin(), window.end());
    const auto mask = cellseg::segment_cells(maps, cfg.cells);
    for (const auto& inst : mask.instances) {
      rows.push_back({kept[i], inst.features.label, inst.features.area_px, inst.features.centroid, inst.coherence,
                      inst.flags});
    }
    io::write_labels(frame_file(dir, "masks", static_cast<std::size_t>(kept[i])), mask.labels.labels);
    window.pop_front();
  }
  cellseg::write_cells_csv(dir / "cells.csv", rows);
}

void track_scene(const ingest::SceneManifest& scene, const PipelineConfig& cfg, const fs::path& dir) {
  const auto kept = kept_frames(dir);
  require_file(dir / "cells.csv", Stage::Cells);
  std::map<int, track::FrameDetections> by_t;
  for (int t : kept) by_t[t].t = t;
  for (const auto& r : cellseg::read_cells_csv(dir / "cells.csv")) {
    by_t[r.t].t = r.t;
    by_t[r.t].detections.push_back({r.instance_id, r.centroid, r.area_px});
  }
  std::vector<track::FrameDetections> frames;
  for (auto& [t, f] : by_t) frames.push_back(std::move(f));
  const auto tracks = track::filter_tracks(track::link_tracks(frames, cfg.track.link), cfg.track.min_duration_min,
                                           scene.frame_interval_min);
  track::write_tracks_csv(dir / "tracks.csv", tracks);
  track::write_track_stats_csv(dir / "track_stats.csv", tracks, scene.pixel_pitch_um, scene.frame_interval_min);
  const auto curve = track::motility_curve(tracks, kept, scene.pixel_pitch_um, scene.frame_interval_min);
  csv::Writer w(dir / "motility.csv", {"t", "mean_speed_um_min", "total_movement_um", "tracks"});
  for (const auto& p : curve) {
    w.row({csv::num(p.t), csv::num(p.mean_speed_um_per_min), csv::num(p.total_movement_um), csv::num(p.tracks)});
  }
  w.close();
}

// Scene curves on the grid 0..frames-1. Analyzed frames carry values;
// rejected frames between two analyzed ones are linearly interpolated and
// frames outside the analyzed range stay NaN.
report::SceneCurves scene_curves(const ingest::SceneManifest& scene, const fs::path& dir, std::size_t grid) {
  const auto kept = kept_frames(dir);
  const double px2 = scene.pixel_pitch_um * scene.pixel_pitch_um;
  std::map<int, report::MetricValues> at;
  for (int t : kept) at[t].fill(0.0);

  require_file(dir / "eaten_curve.csv", Stage::Aggregates);
  for (const auto& p : aggregates::read_curve_csv(dir / "eaten_curve.csv", scene.pixel_pitch_um)) {
    if (at.count(p.t)) at[p.t][static_cast<std::size_t>(report::Metric::EatenArea)] = p.eaten_um2;
  }
  require_file(dir / "cells.csv", Stage::Cells);
  std::map<int, std::pair<int, double>> cells;  // count, total area um^2
  for (const auto& r : cellseg::read_cells_csv(dir / "cells.csv")) {
    cells[r.t].first += 1;
    cells[r.t].second += static_cast<double>(r.area_px) * px2;
  }
  require_file(dir / "motility.csv", Stage::Track);
  const auto mot = csv::read(dir / "motility.csv");
  const std::size_t mt = mot.column("t"), ms = mot.column("mean_speed_um_min"), mm = mot.column("total_movement_um"),
                    mn = mot.column("tracks");
  std::map<int, std::array<double, 2>> motility;
  for (const auto& r : mot.rows) {
    const bool any = csv::to_int(r[mn]) > 0;
    motility[static_cast<int>(csv::to_int(r[mt]))] = {any ? csv::to_double(r[mm]) : std::nan(""),
                                                       any ? csv::to_double(r[ms]) : std::nan("")};
  }
  for (auto& [t, v] : at) {
    using report::Metric;
    const auto [n, area] = cells.count(t) ? cells[t] : std::pair<int, double>{0, 0.0};
    const double eaten = v[static_cast<std::size_t>(Metric::EatenArea)];
    v[static_cast<std::size_t>(Metric::CellCount)] = n;
    v[static_cast<std::size_t>(Metric::MeanCellArea)] = n ? area / n : std::nan("");
    v[static_cast<std::size_t>(Metric::EatenPerCell)] = n ? eaten / n : std::nan("");
    v[static_cast<std::size_t>(Metric::EatenPerCellArea)] = area > 0 ? eaten / area : std::nan("");
    const auto m = motility.count(t) ? motility[t] : std::array<double, 2>{std::nan(""), std::nan("")};
    v[static_cast<std::size_t>(Metric::TotalMovement)] = m[0];
    v[static_cast<std::size_t>(Metric::MeanSpeed)] = m[1];
  }

  report::SceneCurves sc;
  sc.scene = scene.scene_id;
  for (auto& v : sc.values) v.assign(grid, std::nan(""));
  for (std::size_t m = 0; m < report::kMetricCount; ++m) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const int t0 = kept[i];
      sc.values[m][static_cast<std::size_t>(t0)] = at[t0][m];
      if (i + 1 == kept.size()) break;
      const int t1 = kept[i + 1];
      for (int t = t0 + 1; t < t1; ++t) {
        const double f = static_cast<double>(t - t0) / (t1 - t0);
        sc.values[m][static_cast<std::size_t>(t)] = (1 - f) * at[t0][m] + f * at[t1][m];
      }
    }
  }
  return sc;
}

std::string read_quality_pass(const fs::path& dir) {
  std::ifstream in(dir / "quality_report.txt");
  if (!in) throw IoError("missing " + (dir / "quality_report.txt").string() + "; run the qc stage first");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("pass:", 0) == 0) return line.substr(line.find_first_not_of(' ', 5));
  }
  throw IoError("no pass line in " + (dir / "quality_report.txt").string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Normalize: return "normalize";
    case Stage::Register: return "register";
    case Stage::Qc: return "qc";
    case Stage::Aggregates: return "aggregates";
    case Stage::Cells: return "cells";
    case Stage::Track: return "track";
  }
  return "?";
}

fs::path scene_output_dir(const PipelineConfig& config, const ingest::SceneManifest& scene) {
  return config.run.output / scene.condition / scene.scene_id;
}

void run_stage(Stage stage, const ingest::SceneManifest& scene, const PipelineConfig& config) {
  const fs::path dir = scene_output_dir(config, scene);
  fs::create_directories(dir);
  switch (stage) {
    case Stage::Normalize: normalize_scene(scene, config, dir); break;
    case Stage::Register: register_scene(scene, config, dir); break;
    case Stage::Qc: qc_scene(scene, config, dir); break;
    case Stage::Aggregates: aggregates_scene(scene, config, dir); break;
    case Stage::Cells: cells_scene(scene, config, dir); break;
    case Stage::Track: track_scene(scene, config, dir); break;
  }
}

std::vector<ingest::SceneManifest> select_scenes(const PipelineConfig& config, const std::string& condition) {
  const fs::path& root = config.dataset.root;
  if (root.empty()) throw ConfigError("dataset.root is not set");
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  std::vector<std::string> conditions = config.dataset.conditions;
  if (conditions.empty()) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) conditions.push_back(e.path().filename().string());
    }
    std::sort(conditions.begin(), conditions.end());
  }
  std::vector<ingest::SceneManifest> out;
  for (auto& m : ingest::scan_dataset(root, conditions, config.dataset.frame_interval_min, config.dataset.pixel_pitch_um)) {
    if (!condition.empty() && m.condition != condition) continue;
    if (fnmatch(config.run.scenes.c_str(), m.key().c_str(), 0) != 0) continue;
    out.push_back(std::move(m));
  }
  return out;
}

std::string config_fingerprint(const PipelineConfig& config) {
  PipelineConfig c = config;
  c.run = PipelineConfig::Run{};
  return sha256_hex(to_yaml(c));
}

std::vector<SceneOutcome> run_scene_stages(const std::vector<ingest::SceneManifest>& scenes,
                                           const std::vector<Stage>& stages, const PipelineConfig& config,
                                           const RunOptions& options) {
  const std::string fp = config_fingerprint(config);
  const std::function<bool(const ingest::SceneManifest&)> work = [&](const ingest::SceneManifest& scene) {
    const fs::path dir = scene_output_dir(config, scene);
    bool ran = false;
    for (Stage s : stages) {
      const fs::path marker = dir / (".stage_" + std::string(stage_name(s)));
      if (options.resume && !ran && fs::exists(marker) && read_text(marker) == fp + "\n") continue;
      fs::remove(marker);
      run_stage(s, scene, config);
      std::ofstream(marker) << fp << "\n";
      ran = true;
    }
    return ran;
  };
  const auto results = ingest::run_scenes<bool>(scenes, work, config.run.workers, options.stop);
  std::vector<SceneOutcome> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    SceneOutcome o;
    o.key = scenes[i].key();
    switch (results[i].status) {
      case ingest::SceneStatus::Ok: o.status = *results[i].value ? "ok" : "resumed"; break;
      case ingest::SceneStatus::Failed: o.status = "failed"; break;
      case ingest::SceneStatus::Skipped: o.status = "skipped"; break;
    }
    o.error = results[i].error;
    out.push_back(std::move(o));
  }
  return out;
}

ReportSummary run_report(const std::vector<ingest::SceneManifest>& scenes, const PipelineConfig& config) {
  ReportSummary summary;
  std::vector<std::string> order;
  for (const auto& scene : scenes) {
    if (std::find(order.begin(), order.end(), scene.condition) == order.end()) order.push_back(scene.condition);
  }
  if (order.size() != 2) {
    throw UnsupportedConfiguration("the report compares exactly two conditions, found " +
                                   std::to_string(order.size()));
  }
  std::map<std::string, std::vector<std::pair<const ingest::SceneManifest*, report::SceneCurves>>> by_condition;
  for (const auto& scene : scenes) {
    const fs::path dir = scene_output_dir(config, scene);
    try {
      if (!scene.valid) throw InvalidArgument("invalid scene: " + scene.reason);
      if (read_quality_pass(dir) != "yes") throw DegenerateInput("failed quality control");
      by_condition[scene.condition].emplace_back(&scene, scene_curves(scene, dir, scene.frame_count));
      summary.included.push_back(scene.key());
    } catch (const std::exception& e) {
      summary.excluded.push_back(scene.key() + ": " + e.what());
    }
  }
  std::vector<report::ConditionCurves> conditions;
  for (const auto& name : order) {
    report::ConditionCurves c;
    c.name = name;
    auto& list = by_condition[name];
    if (list.empty()) throw DegenerateInput("condition " + name + " has no scene passing quality control");
    std::size_t grid = 0;
    double interval = 0.0;
    for (const auto& [m, sc] : list) {
      grid = std::max(grid, m->frame_count);
      interval = m->frame_interval_min;
    }
    for (std::size_t t = 0; t < grid; ++t) c.time_min.push_back(static_cast<double>(t) * interval);
    for (auto& [m, sc] : list) {
      for (auto& v : sc.values) v.resize(grid, std::nan(""));
      c.scenes.push_back(std::move(sc));
    }
    conditions.push_back(std::move(c));
  }
  const fs::path out = config.run.output / "report";
  report::ReportOptions ropts;
  ropts.window = config.report;
  report::emit_report(conditions, out, ropts);

  std::vector<std::string> header = {"condition", "scene", "time_min"};
  for (auto m : report::kAllMetrics) header.emplace_back(report::metric_name(m));
  csv::Writer w(out / "scene_curves.csv", header);
  for (const auto& c : conditions) {
    for (const auto& s : c.scenes) {
      for (std::size_t i = 0; i < c.time_min.size(); ++i) {
        std::vector<std::string> row = {c.name, s.scene, csv::num(c.time_min[i])};
        for (const auto& v : s.values) row.push_back(csv::num(v[i]));
        w.row(row);
      }
    }
  }
  w.close();
  csv::Writer ex(out / "excluded_scenes.csv", {"scene", "reason"});
  for (const auto& e : summary.excluded) {
    const auto colon = e.find(": ");
    std::string reason = e.substr(colon + 2);
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    ex.row({e.substr(0, colon), reason});
  }
  ex.close();
  return summary;
}

}  // namespace phagoq::pipeline
