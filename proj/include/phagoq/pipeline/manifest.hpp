#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phagoq/ingest/dataset.hpp"
#include "phagoq/pipeline/config.hpp"
#include "phagoq/pipeline/stages.hpp"

namespace phagoq::pipeline {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunRecord {
  std::string subcommand;
  std::vector<std::string> arguments;  // flags as given, without the config path
  std::vector<SceneOutcome> outcomes;
  std::vector<std::string> notes;
};

// <output>/run_manifest_<subcommand>.yaml: version, subcommand, arguments,
// the resolved configuration (loadable with --config), one SHA-256 per
// scene over its input files, and per-scene outcomes. No timestamps, so
// identical runs produce identical manifests.
std::filesystem::path write_run_manifest(const PipelineConfig& config, const std::vector<ingest::SceneManifest>& scenes,
                                         const RunRecord& record);

}  // namespace phagoq::pipeline
