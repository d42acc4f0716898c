#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "phagoq/aggregates/aggregates.hpp"
#include "phagoq/cellseg/cellseg.hpp"
#include "phagoq/error.hpp"
#include "phagoq/qualitycheck/quality.hpp"
#include "phagoq/registration/sequence.hpp"
#include "phagoq/report/report.hpp"
#include "phagoq/track/track.hpp"

namespace phagoq::pipeline {

// Bad configuration file, key or value. The message names the file, line
// and key where known.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct PipelineConfig {
  struct Dataset {
    std::filesystem::path root;
    std::vector<std::string> conditions;  // empty: every subdirectory of root, sorted
    double frame_interval_min = 2.0;
    double pixel_pitch_um = kDefaultPixelPitchUm;
  } dataset;

  struct Run {
    std::filesystem::path output = "phagoq_out";
    int workers = 1;
    std::string scenes = "*";  // glob over "condition/scene"
  } run;

  struct Normalize {
    double aggregate_lo_percentile = 0.005;
    double aggregate_hi_percentile = 0.995;
  } normalize;

  struct Registration {
    registration::CascadeSchedule schedule;
    registration::Anchor anchor = registration::Anchor::PreviousFrame;
    double shift_tolerance_px = registration::kDefaultShiftTolerancePx;
  } registration;

  quality::BlurConfig quality;

  struct Aggregates {
    aggregates::SegmentOptions segment;
    aggregates::EventCriteria events;
    double max_match_dist_px = aggregates::kDefaultMatchDistancePx;
  } aggregates;

  cellseg::SegmentOptions cells;

  struct Track {
    track::LinkOptions link;
    double min_duration_min = 100.0;
  } track;

  report::Window report;

  // Throws ConfigError naming the first offending key.
  void validate() const;
};

// One documented configuration key, "section.name".
struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  std::function<void(PipelineConfig&, const std::string& yaml_value)> set;
  std::function<std::string(const PipelineConfig&)> get;  // YAML flow text

  std::string env_var() const;  // PHAGOQ_<SECTION>_<NAME>
};

const std::vector<ConfigKey>& config_keys();

// Reads a YAML file (or the `config` map of a run manifest). Missing keys
// keep their defaults; unknown sections or keys are errors. Environment
// variables PHAGOQ_<SECTION>_<NAME> override file values. The result is
// validated.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig load_config_text(const std::string& yaml, const std::string& origin = "<string>");
// Defaults plus environment overrides.
PipelineConfig default_config();

// Full resolved configuration as YAML, every key present, keys in
// config_keys() order.
std::string to_yaml(const PipelineConfig& config);

// Key reference for --help.
std::string describe_keys();

}  // namespace phagoq::pipeline
