#include "phagoq/ingest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <utility>

#include "phagoq/ingest/image_io.hpp"

namespace phagoq::ingest {
namespace fs = std::filesystem;

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Aggregates:
      return "aggregates";
    case Channel::Cells:
      return "cells";
    case Channel::Probability:
      return "probability";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  if (name == "aggregates") return Channel::Aggregates;
  if (name == "cells") return Channel::Cells;
  if (name == "probability") return Channel::Probability;
  throw InvalidArgument("unknown channel '" + std::string(name) + "'");
}

const std::vector<fs::path>& SceneManifest::paths(Channel c) const {
  switch (c) {
    case Channel::Aggregates:
      return aggregates;
    case Channel::Cells:
      return cells;
    case Channel::Probability:
      return probability;
  }
  return aggregates;
}

namespace {

std::optional<long> frame_index(const fs::path& p) {
  const std::string stem = p.stem().string();
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext != ".tif" && ext != ".tiff" && ext != ".png") return std::nullopt;
  if (stem.size() < 2 || stem[0] != 't') return std::nullopt;
  long v = 0;
  auto [ptr, ec] = std::from_chars(stem.data() + 1, stem.data() + stem.size(), v);
  if (ec != std::errc{} || ptr != stem.data() + stem.size()) return std::nullopt;
  return v;
}

// Frame files of one channel directory ordered by index, or nullopt when the
// directory is missing. Duplicate indices (t0001.tif next to t0001.png) are
// reported through `dup`.
std::optional<std::vector<fs::path>> list_frames(const fs::path& dir, bool& dup) {
  if (!fs::is_directory(dir)) return std::nullopt;
  std::vector<std::pair<long, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (auto idx = frame_index(e.path())) found.emplace_back(*idx, e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (i > 0 && found[i].first == found[i - 1].first) dup = true;
    out.push_back(found[i].second);
  }
  return out;
}

void invalidate(SceneManifest& m, std::string reason) {
  if (!m.valid) return;
  m.valid = false;
  m.reason = std::move(reason);
}

}  // namespace

SceneManifest scan_scene(const fs::path& scene_dir, std::string condition, double frame_interval_min,
                         double pixel_pitch_um) {
  if (!(frame_interval_min > 0)) throw InvalidArgument("frame_interval_min must be positive");
  if (!(pixel_pitch_um > 0)) throw InvalidArgument("pixel_pitch_um must be positive");
  SceneManifest m;
  m.condition = std::move(condition);
  m.scene_id = scene_dir.filename().string();
  m.directory = scene_dir;
  m.frame_interval_min = frame_interval_min;
  m.pixel_pitch_um = pixel_pitch_um;

  bool dup = false;
  auto agg = list_frames(scene_dir / "aggregates", dup);
  auto cel = list_frames(scene_dir / "cells", dup);
  auto prob = list_frames(scene_dir / "probability", dup);
  if (!agg) invalidate(m, "missing channel directory 'aggregates'");
  if (!cel) invalidate(m, "missing channel directory 'cells'");
  if (agg) m.aggregates = std::move(*agg);
  if (cel) m.cells = std::move(*cel);
  if (prob) m.probability = std::move(*prob);
  if (dup) invalidate(m, "duplicate frame index");
  if (m.valid && m.aggregates.size() != m.cells.size()) invalidate(m, "channel length mismatch");
  if (m.valid && prob && m.probability.size() != m.aggregates.size()) invalidate(m, "channel length mismatch");
  if (m.valid && m.aggregates.empty()) invalidate(m, "no frames");
  m.frame_count = m.valid ? m.aggregates.size() : std::max(m.aggregates.size(), m.cells.size());
  return m;
}

std::vector<SceneManifest> scan_dataset(const fs::path& root, const std::vector<std::string>& conditions,
                                        double frame_interval_min, double pixel_pitch_um) {
  if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
  std::vector<SceneManifest> out;
  for (const std::string& cond : conditions) {
    const fs::path cdir = root / cond;
    if (!fs::is_directory(cdir)) continue;
    std::vector<fs::path> scenes;
    for (const auto& e : fs::directory_iterator(cdir)) {
      if (e.is_directory()) scenes.push_back(e.path());
    }
    std::sort(scenes.begin(), scenes.end());
    for (const auto& s : scenes) out.push_back(scan_scene(s, cond, frame_interval_min, pixel_pitch_um));
  }
  return out;
}

Frame load_frame(const SceneManifest& manifest, Channel channel, std::size_t t) {
  const auto& files = manifest.paths(channel);
  if (t >= files.size()) {
    throw InvalidArgument("frame " + std::to_string(t) + " out of range for " + manifest.key() + "/" +
                          std::string(channel_name(channel)) + " (" + std::to_string(files.size()) + " frames)");
  }
  Frame f;
  try {
    f = io::read_frame(files[t]);
  } catch (const IoError& e) {
    throw IoError("scene " + manifest.key() + ", channel " + std::string(channel_name(channel)) + ", t=" +
                  std::to_string(t) + ": " + e.what());
  }
  f.t_index = static_cast<int>(t);
  f.pixel_pitch_um = manifest.pixel_pitch_um;
  return f;
}

}  // namespace phagoq::ingest
