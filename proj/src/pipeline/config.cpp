#include "phagoq/pipeline/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace phagoq::pipeline {

namespace {

template <typename F>
std::string shortest(F v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  YAML::Emitter e;
  e << YAML::DoubleQuoted << s;
  return e.c_str();
}

template <typename T>
T parse_as(const std::string& text) {
  return YAML::Load(text).as<T>();
}

template <typename T>
std::string emit(const T& v) {
  if constexpr (std::is_same_v<T, double> || std::is_same_v<T, float>) {
    return shortest(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return quoted(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + emit(v[i]);
    return s + "]";
  }
}

// Key bound to one field; `ref` returns the field inside a config.
template <typename T, typename Ref>
ConfigKey bind(std::string section, std::string name, std::string help, Ref ref) {
  ConfigKey k;
  k.section = std::move(section);
  k.name = std::move(name);
  k.help = std::move(help);
  k.set = [ref](PipelineConfig& c, const std::string& text) { ref(c) = parse_as<T>(text); };
  k.get = [ref](const PipelineConfig& c) { return emit<T>(ref(const_cast<PipelineConfig&>(c))); };
  return k;
}

ConfigKey bind_path(std::string section, std::string name, std::string help,
                    std::filesystem::path& (*ref)(PipelineConfig&)) {
  ConfigKey k;
  k.section = std::move(section);
  k.name = std::move(name);
  k.help = std::move(help);
  k.set = [ref](PipelineConfig& c, const std::string& text) {
    const YAML::Node n = YAML::Load(text);
    ref(c) = n.IsNull() ? std::filesystem::path() : std::filesystem::path(n.as<std::string>());
  };
  k.get = [ref](const PipelineConfig& c) { return quoted(ref(const_cast<PipelineConfig&>(c)).string()); };
  return k;
}

std::vector<ConfigKey> build_keys() {
  using C = PipelineConfig;
  std::vector<ConfigKey> k;
  k.push_back(bind_path("dataset", "root", "dataset root: <root>/<condition>/<scene>/<channel>/tNNNN.tif",
                        [](C& c) -> std::filesystem::path& { return c.dataset.root; }));
  k.push_back(bind<std::vector<std::string>>("dataset", "conditions",
                                             "condition directories to process; empty means all, sorted",
                                             [](C& c) -> auto& { return c.dataset.conditions; }));
  k.push_back(bind<double>("dataset", "frame_interval_min", "minutes between frames",
                           [](C& c) -> auto& { return c.dataset.frame_interval_min; }));
  k.push_back(bind<double>("dataset", "pixel_pitch_um", "pixel size in micrometres",
                           [](C& c) -> auto& { return c.dataset.pixel_pitch_um; }));

  k.push_back(bind_path("run", "output", "output root",
                        [](C& c) -> std::filesystem::path& { return c.run.output; }));
  k.push_back(bind<int>("run", "workers", "scenes processed concurrently",
                        [](C& c) -> auto& { return c.run.workers; }));
  k.push_back(bind<std::string>("run", "scenes", "glob over condition/scene selecting scenes",
                                [](C& c) -> auto& { return c.run.scenes; }));

  k.push_back(bind<double>("normalize", "aggregate_lo_percentile", "aggregate channel low percentile (fraction)",
                           [](C& c) -> auto& { return c.normalize.aggregate_lo_percentile; }));
  k.push_back(bind<double>("normalize", "aggregate_hi_percentile", "aggregate channel high percentile (fraction)",
                           [](C& c) -> auto& { return c.normalize.aggregate_hi_percentile; }));

  k.push_back(bind<std::vector<int>>("registration", "stages",
                                     "cascade Gaussian kernel sizes, strictly decreasing, odd, ending with 0",
                                     [](C& c) -> auto& { return c.registration.schedule.stages; }));
  k.push_back(bind<int>("registration", "max_iterations", "ECC iterations per stage",
                        [](C& c) -> auto& { return c.registration.schedule.ecc.max_iterations; }));
  k.push_back(bind<double>("registration", "epsilon", "ECC stop threshold on the correlation increment",
                           [](C& c) -> auto& { return c.registration.schedule.ecc.epsilon; }));
  {
    ConfigKey a;
    a.section = "registration";
    a.name = "anchor";
    a.help = "previous_frame (pairwise, summed) or first_frame";
    a.set = [](C& c, const std::string& t) { c.registration.anchor = registration::parse_anchor(parse_as<std::string>(t)); };
    a.get = [](const C& c) { return quoted(registration::anchor_name(c.registration.anchor)); };
    k.push_back(std::move(a));
  }
  k.push_back(bind<double>("registration", "shift_tolerance_px",
                           "largest cumulative drift before a scene fails quality control",
                           [](C& c) -> auto& { return c.registration.shift_tolerance_px; }));

  k.push_back(bind<double>("quality", "epsilon_blur", "relative Laplacian-variance drop that marks a blurry frame",
                           [](C& c) -> auto& { return c.quality.epsilon_blur; }));
  k.push_back(bind<int>("quality", "lookahead_frames", "frames scanned for recovery after a drop",
                        [](C& c) -> auto& { return c.quality.lookahead_B; }));
  k.push_back(bind<double>("quality", "max_blurry_fraction", "largest rejected-frame fraction of a passing scene",
                           [](C& c) -> auto& { return c.quality.max_blurry_fraction; }));

  k.push_back(bind<float>("aggregates", "threshold", "foreground threshold on normalized aggregate frames",
                          [](C& c) -> auto& { return c.aggregates.segment.threshold; }));
  k.push_back(bind<std::int64_t>("aggregates", "min_area_px", "smallest aggregate kept",
                                 [](C& c) -> auto& { return c.aggregates.segment.min_area_px; }));
  k.push_back(bind<double>("aggregates", "max_match_dist_px", "centroid gate for frame-to-frame matching",
                           [](C& c) -> auto& { return c.aggregates.max_match_dist_px; }));
  k.push_back(bind<double>("aggregates", "area_ratio", "event when area <= ratio * previous area",
                           [](C& c) -> auto& { return c.aggregates.events.area_ratio; }));
  k.push_back(bind<double>("aggregates", "min_displacement_um", "event when the centroid moves at least this far",
                           [](C& c) -> auto& { return c.aggregates.events.min_displacement_um; }));
  {
    ConfigKey r;
    r.section = "aggregates";
    r.name = "rule";
    r.help = "conjunction (area and displacement) or disjunction (either)";
    r.set = [](C& c, const std::string& t) { c.aggregates.events.rule = aggregates::parse_rule(parse_as<std::string>(t)); };
    r.get = [](const C& c) { return quoted(std::string(aggregates::rule_name(c.aggregates.events.rule))); };
    k.push_back(std::move(r));
  }

  k.push_back(bind<int>("cells", "window", "time-coherence window in frames",
                        [](C& c) -> auto& { return c.cells.ttcm.window_W; }));
  k.push_back(bind<float>("cells", "seed_threshold", "coherence needed for a watershed seed",
                          [](C& c) -> auto& { return c.cells.ttcm.seed_threshold; }));
  k.push_back(bind<float>("cells", "mask_threshold", "probability threshold of the foreground mask",
                          [](C& c) -> auto& { return c.cells.ttcm.mask_threshold; }));
  k.push_back(bind<std::int64_t>("cells", "min_unseeded_area_px", "smallest unseeded component kept as a cell",
                                 [](C& c) -> auto& { return c.cells.min_unseeded_area_px; }));

  k.push_back(bind<double>("track", "gate_px", "largest centroid jump linked between analyzed frames",
                           [](C& c) -> auto& { return c.track.link.gate_px; }));
  k.push_back(bind<int>("track", "max_gap_frames", "missed analyzed frames tolerated inside a track",
                        [](C& c) -> auto& { return c.track.link.max_gap_frames; }));
  k.push_back(bind<double>("track", "min_duration_min", "shortest track kept, inclusive",
                           [](C& c) -> auto& { return c.track.min_duration_min; }));

  k.push_back(bind<double>("report", "window_begin_min", "start of the summary window",
                           [](C& c) -> auto& { return c.report.begin_min; }));
  k.push_back(bind<double>("report", "window_end_min", "end of the summary window",
                           [](C& c) -> auto& { return c.report.end_min; }));
  return k;
}

std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

std::string at(const std::string& origin, const YAML::Mark& m) {
  if (m.is_null()) return origin;
  return origin + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

const ConfigKey* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

void set_key(PipelineConfig& c, const ConfigKey& k, const std::string& text, const std::string& where) {
  try {
    k.set(c, text);
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": bad value for " + k.section + "." + k.name + ": " + text);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": bad value for " + k.section + "." + k.name + ": " + e.what());
  }
}

void apply_env(PipelineConfig& c) {
  for (const auto& k : config_keys()) {
    if (const char* v = std::getenv(k.env_var().c_str())) set_key(c, k, v, "environment " + k.env_var());
  }
}

PipelineConfig from_node(const YAML::Node& doc, const std::string& origin) {
  PipelineConfig c;
  YAML::Node root = doc;
  if (root.IsMap() && root["phagoq_run_manifest"]) root = root["config"];
  if (root && !root.IsNull()) {
    if (!root.IsMap()) throw ConfigError(at(origin, root.Mark()) + ": top level must be a map of sections");
    for (const auto& sec : root) {
      const std::string section = sec.first.as<std::string>();
      const bool known = std::any_of(config_keys().begin(), config_keys().end(),
                                     [&](const ConfigKey& k) { return k.section == section; });
      if (!known) throw ConfigError(at(origin, sec.first.Mark()) + ": unknown section '" + section + "'");
      if (sec.second.IsNull()) continue;
      if (!sec.second.IsMap()) throw ConfigError(at(origin, sec.second.Mark()) + ": section '" + section + "' must be a map");
      for (const auto& kv : sec.second) {
        const std::string name = kv.first.as<std::string>();
        const ConfigKey* k = find_key(section, name);
        if (k == nullptr) {
          throw ConfigError(at(origin, kv.first.Mark()) + ": unknown key '" + section + "." + name + "'");
        }
        set_key(c, *k, YAML::Dump(kv.second), at(origin, kv.second.Mark()));
      }
    }
  }
  apply_env(c);
  c.validate();
  return c;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + " " + what);
}

}  // namespace

std::string ConfigKey::env_var() const { return "PHAGOQ_" + upper(section) + "_" + upper(name); }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void PipelineConfig::validate() const {
  require(dataset.frame_interval_min > 0, "dataset.frame_interval_min", "must be > 0");
  require(dataset.pixel_pitch_um > 0, "dataset.pixel_pitch_um", "must be > 0");
  require(run.workers >= 1, "run.workers", "must be >= 1");
  require(!run.output.empty(), "run.output", "must not be empty");
  require(normalize.aggregate_lo_percentile >= 0 && normalize.aggregate_lo_percentile < normalize.aggregate_hi_percentile &&
              normalize.aggregate_hi_percentile <= 1,
          "normalize.aggregate_lo_percentile/aggregate_hi_percentile", "must satisfy 0 <= lo < hi <= 1");
  try {
    registration.schedule.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("registration.stages ") + e.what());
  }
  require(registration.schedule.ecc.max_iterations >= 1, "registration.max_iterations", "must be >= 1");
  require(registration.schedule.ecc.epsilon > 0, "registration.epsilon", "must be > 0");
  require(registration.shift_tolerance_px > 0, "registration.shift_tolerance_px", "must be > 0");
  try {
    quality.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("quality: ") + e.what());
  }
  require(aggregates.segment.threshold > 0 && aggregates.segment.threshold < 1, "aggregates.threshold",
          "must lie in (0, 1)");
  require(aggregates.segment.min_area_px >= 1, "aggregates.min_area_px", "must be >= 1");
  require(aggregates.max_match_dist_px >= 0, "aggregates.max_match_dist_px", "must be >= 0");
  require(aggregates.events.area_ratio > 0 && aggregates.events.area_ratio <= 1, "aggregates.area_ratio",
          "must lie in (0, 1]");
  require(aggregates.events.min_displacement_um >= 0, "aggregates.min_displacement_um", "must be >= 0");
  try {
    cells.ttcm.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("cells: ") + e.what());
  }
  require(cells.min_unseeded_area_px >= 1, "cells.min_unseeded_area_px", "must be >= 1");
  require(track.link.gate_px > 0, "track.gate_px", "must be > 0");
  require(track.link.max_gap_frames >= 0, "track.max_gap_frames", "must be >= 0");
  require(track.min_duration_min >= 0, "track.min_duration_min", "must be >= 0");
  require(report.begin_min >= 0 && report.end_min > report.begin_min, "report.window_begin_min/window_end_min",
          "must satisfy 0 <= begin < end");
}

PipelineConfig load_config_text(const std::string& yaml, const std::string& origin) {
  YAML::Node doc;
  try {
    doc = YAML::Load(yaml);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(at(origin, e.mark) + ": " + e.msg);
  }
  return from_node(doc, origin);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), path.string());
}

PipelineConfig default_config() { return from_node(YAML::Node(), "<defaults>"); }

std::string to_yaml(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      section = k.section;
      out += section + ":\n";
    }
    out += "  " + k.name + ": " + k.get(config) + "\n";
  }
  return out;
}

std::string describe_keys() {
  const PipelineConfig defaults;
  std::string out;
  for (const auto& k : config_keys()) {
    out += "  " + k.section + "." + k.name + " = " + k.get(defaults) + "\n      " + k.help + " [" + k.env_var() + "]\n";
  }
  return out;
}

}  // namespace phagoq::pipeline
