#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phagoq/ingest/dataset.hpp"
#include "phagoq/pipeline/config.hpp"

namespace phagoq::pipeline {

enum class Stage { Normalize, Register, Qc, Aggregates, Cells, Track };
inline constexpr Stage kAllStages[] = {Stage::Normalize, Stage::Register, Stage::Qc,
                                       Stage::Aggregates, Stage::Cells,    Stage::Track};

std::string_view stage_name(Stage s);

// <output>/<condition>/<scene>
std::filesystem::path scene_output_dir(const PipelineConfig& config, const ingest::SceneManifest& scene);

// Per-scene stages. Each reads the raw scene and the outputs of earlier
// stages from the scene output directory and streams frames one at a time.
//
//   normalize   normalized/{aggregates,cells}/tNNNN.tif (8-bit), profile_{aggregates,cells}.yaml
//   register    registration.csv, aligned/{aggregates,cells}/tNNNN.tif
//   qc          quality.csv, quality_report.txt
//   aggregates  aggregates.csv, events.csv, eaten_curve.csv
//   cells       cells.csv, masks/tNNNN.tif (analyzed frames only)
//   track       tracks.csv, track_stats.csv, motility.csv
void run_stage(Stage stage, const ingest::SceneManifest& scene, const PipelineConfig& config);

// Scenes of the configured dataset matching run.scenes and, when set,
// `condition`. Throws IoError when the dataset root is missing.
std::vector<ingest::SceneManifest> select_scenes(const PipelineConfig& config, const std::string& condition = {});

struct SceneOutcome {
  std::string key;  // condition/scene
  std::string status;  // ok, failed, skipped, resumed
  std::string error;
};

struct RunOptions {
  bool resume = false;  // skip scenes whose stages already completed under the same configuration
  const std::atomic<bool>* stop = nullptr;
};

// Runs `stages` in order for every scene, scenes in parallel on
// config.run.workers threads. A completed scene gets a marker file per stage
// holding the configuration fingerprint.
std::vector<SceneOutcome> run_scene_stages(const std::vector<ingest::SceneManifest>& scenes,
                                           const std::vector<Stage>& stages, const PipelineConfig& config,
                                           const RunOptions& options = {});

struct ReportSummary {
  std::vector<std::string> included;
  std::vector<std::string> excluded;  // "condition/scene: reason"
};

// Builds per-scene curves from the stage outputs, drops scenes that failed
// quality control or lack outputs, and writes <output>/report/.
ReportSummary run_report(const std::vector<ingest::SceneManifest>& scenes, const PipelineConfig& config);

// SHA-256 over the configuration text minus the run section.
std::string config_fingerprint(const PipelineConfig& config);

}  // namespace phagoq::pipeline
