#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::synth {

// Sum of Gaussian blobs on a dark background; the registration harness
// input.
Frame blob_texture(int width, int height, int blobs, std::uint64_t seed);

// Per-condition effect sizes. Cells are cell_width x (15 + j) rectangles and
// aggregates aggregate_width x (10 + j), where j = scene index mod 5, so
// ratios between conditions are exact at every scene.
struct ConditionEffect {
  std::string name;
  int cell_width = 20;
  int aggregate_width = 20;
};

struct SynthSpec {
  std::vector<ConditionEffect> conditions = {{"wt", 20, 20}, {"ftd", 26, 34}};
  int scenes_per_condition = 5;
  int frames = 60;
  int width = 256;
  int height = 256;
  int cells = 6;        // at most 16
  int aggregates = 12;  // at most 12
  int events = 3;       // planted phagocytosis events per scene, at most `aggregates`
  int max_drift_px = 8;  // bound on |cumulative drift| per axis
  // Drops in Laplacian variance caused by events need a full quality-control
  // look-ahead window after them to count as content changes.
  int lookahead_frames = 14;
  std::vector<int> blur_frames;
  double blur_sigma = 3.0;
  bool probability = true;
  std::uint64_t seed = 1;

  void validate() const;
};

// Planted event on one aggregate: at t_half its area halves and its centroid
// moves by at least 8 px; at t_vanish the rest disappears.
struct PlantedEvent {
  int aggregate = 0;  // 1-based aggregate id
  int t_half = 0;
  int t_vanish = 0;
};

// Event times shared by every scene of every condition.
std::vector<PlantedEvent> event_schedule(const SynthSpec& spec);

// Writes <root>/<condition>/<scene>/{aggregates,cells[,probability]}/tNNNN.tif
// (16-bit) and ground truth under <scene>/truth/:
//   shifts.csv       t, dx, dy (cumulative drift of frame t relative to frame 0)
//   blur.csv         t of blurred frames
//   events.csv       t, aggregate, kind (half|vanish), area_before_px, area_after_px, x_before, y_before, x_after, y_after
//   eaten_curve.csv  t, total_area_px, eaten_px
//   cells.csv        t, cell, area_px, cx, cy (drift-free coordinates)
//   masks/tNNNN.tif  instance labels in frame coordinates
// The same seed gives byte-identical files.
void synth_dataset(const std::filesystem::path& root, const SynthSpec& spec);

}  // namespace phagoq::synth
