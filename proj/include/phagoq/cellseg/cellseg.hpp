#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phagoq/imgcore/ops.hpp"

namespace phagoq::cellseg {

// Per-pixel foreground probability, values in [0,1].
using ProbabilityMap = Raster<float>;

enum class ProbabilitySource : std::uint8_t { External, ThresholdFallback };

struct ProbabilityStack {
  std::vector<ProbabilityMap> frames;
  ProbabilitySource source = ProbabilitySource::External;

  // Throws InvalidArgument on unequal sizes or values outside [0,1].
  void validate() const;
};

struct TtcmConfig {
  int window_W = 5;
  float seed_threshold = 0.9f;
  float mask_threshold = 0.5f;

  void validate() const;
};

struct Coherence {
  Raster<float> map;  // values k / window_used
  int window_used = 0;
  bool truncated = false;  // fewer than window_W frames were left
};

// Mean of the binarized (>= mask_threshold) maps over the given window.
Coherence ttcm(std::span<const ProbabilityMap> window, const TtcmConfig& cfg = {});
// Window t .. t+W-1, cut at the end of the stack.
Coherence ttcm(const ProbabilityStack& stack, std::size_t t, const TtcmConfig& cfg = {});

struct Seed {
  std::int32_t id = 0;                // 1-based
  std::vector<std::size_t> pixels;    // raster indices
  Point2 centroid;
};

struct SeedSet {
  int width = 0;
  int height = 0;
  std::vector<Seed> seeds;
};

// Pixels with coherence >= seed_threshold, one seed per 8-connected
// component, ids in raster order of first pixel.
SeedSet extract_seeds(const Raster<float>& coherence, const TtcmConfig& cfg = {});

// Integer cost of entering a pixel of probability p.
std::int64_t watershed_cost(float p);

struct WatershedResult {
  LabelMap labels;  // label k belongs to the k-th surviving seed
  std::vector<std::int32_t> seed_ids;  // seed id of each label, index label-1
  int dropped_seeds = 0;               // seeds with no pixel inside the foreground
};

// Priority flood from all seeds at once over the foreground only, 8-connected.
// A pixel goes to the seed with the lowest path cost (sum of entry costs),
// ties to the lower seed id. Foreground not reachable from any seed stays 0.
WatershedResult watershed_instances(const ProbabilityMap& probability, const SeedSet& seeds,
                                    const BinaryMask& foreground);

// Demonstration source when no external maps exist: Otsu foreground of the
// smoothed frame, 0.5 + 0.5 * distance / (max distance of the component)
// inside, 0 outside.
ProbabilityMap threshold_fallback(const Frame& frame);

enum BoundaryFlag : std::uint8_t {
  kFlagNone = 0,
  kFlagTruncatedWindow = 1,
  kFlagBorderTouch = 2,
};

struct Instance {
  RegionFeatures features;
  double coherence = 0.0;
  std::uint8_t flags = kFlagNone;
};

struct InstanceMask {
  LabelMap labels;
  std::vector<Instance> instances;  // index label-1
};

// Mean coherence over the instance's pixels.
double coherence_score(const LabelMap& labels, std::int32_t label, const Raster<float>& coherence);

struct SegmentOptions {
  TtcmConfig ttcm;
  std::int64_t min_unseeded_area_px = 20;
};

// Instances of the first frame of `window` (maps of frames t, t+1, ...).
InstanceMask segment_cells(std::span<const ProbabilityMap> window, const SegmentOptions& options = {});

// cells.csv: t, instance_id, area_px, cx, cy, coherence, boundary_flags
struct CellRow {
  int t = 0;
  std::int32_t instance_id = 0;
  std::int64_t area_px = 0;
  Point2 centroid;
  double coherence = 0.0;
  std::uint8_t flags = 0;
};
void write_cells_csv(const std::filesystem::path& path, std::span<const CellRow> rows);
std::vector<CellRow> read_cells_csv(const std::filesystem::path& path);

}  // namespace phagoq::cellseg
