#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::ingest {

enum class Channel { Aggregates, Cells, Probability };

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view name);

inline constexpr double kDefaultFrameIntervalMin = 2.0;

// One field of view on disk:
//   <root>/<condition>/<scene>/{aggregates,cells[,probability]}/t0000.tif ...
// The probability channel is optional; when present it must have the same
// length as the other two.
struct SceneManifest {
  std::string condition;
  std::string scene_id;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> aggregates;
  std::vector<std::filesystem::path> cells;
  std::vector<std::filesystem::path> probability;
  std::size_t frame_count = 0;
  double frame_interval_min = kDefaultFrameIntervalMin;
  double pixel_pitch_um = kDefaultPixelPitchUm;
  bool valid = true;
  std::string reason;

  bool has_probability() const { return !probability.empty(); }
  const std::vector<std::filesystem::path>& paths(Channel c) const;
  // "condition/scene"
  std::string key() const { return condition + "/" + scene_id; }
};

// Frame files are t<digits>.{tif,tiff,png}; they are ordered by the numeric
// index, and other files are ignored. Scenes come out sorted by name within
// each condition, conditions in the order given.
std::vector<SceneManifest> scan_dataset(const std::filesystem::path& root, const std::vector<std::string>& conditions,
                                        double frame_interval_min = kDefaultFrameIntervalMin,
                                        double pixel_pitch_um = kDefaultPixelPitchUm);

SceneManifest scan_scene(const std::filesystem::path& scene_dir, std::string condition,
                         double frame_interval_min = kDefaultFrameIntervalMin,
                         double pixel_pitch_um = kDefaultPixelPitchUm);

// Reads exactly one frame. Throws InvalidArgument when t is out of range and
// IoError (naming scene, channel and t) when the file cannot be decoded.
Frame load_frame(const SceneManifest& manifest, Channel channel, std::size_t t);

}  // namespace phagoq::ingest
