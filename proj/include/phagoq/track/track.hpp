#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::track {

struct Detection {
  std::int32_t instance_id = 0;
  Point2 position;  // drift-corrected centroid, pixels
  std::int64_t area_px = 0;
};

struct FrameDetections {
  int t = 0;
  std::vector<Detection> detections;
};

struct Observation {
  int t = 0;
  std::int32_t instance_id = 0;
  Point2 position;
  std::int64_t area_px = 0;
};

struct Track {
  int id = 0;
  std::vector<Observation> observations;  // strictly increasing t

  double duration_min(double frame_interval_min) const;
};

struct LinkOptions {
  double gate_px = 50.0;
  int max_gap_frames = 1;
};

// Frame by frame: candidate (track, detection) pairs within the gate are
// taken greedily by (distance, track id, detection order). Unmatched
// detections open new tracks. A track missing from more than max_gap_frames
// consecutive entries of `frames` is closed. Gaps count entries of `frames`,
// so frames dropped by quality control do not count as gaps.
std::vector<Track> link_tracks(std::span<const FrameDetections> frames, const LinkOptions& options = {});

// Keeps tracks with duration >= min_duration_min.
std::vector<Track> filter_tracks(std::span<const Track> tracks, double min_duration_min, double frame_interval_min);

struct Motility {
  bool defined = false;  // false with fewer than 2 observations
  double mean_speed_um_per_min = 0.0;
  double total_displacement_um = 0.0;
};

Motility motility_stats(const Track& track, double pixel_pitch_um, double frame_interval_min);

// Per analyzed frame: mean step speed of the tracks that have a step ending
// at t, and mean path length travelled so far by the tracks observed at t.
struct MotilityPoint {
  int t = 0;
  double mean_speed_um_per_min = 0.0;
  double total_movement_um = 0.0;
  int tracks = 0;
};
std::vector<MotilityPoint> motility_curve(std::span<const Track> tracks, std::span<const int> frame_ts,
                                          double pixel_pitch_um, double frame_interval_min);

// tracks.csv: track_id, t, x, y, area_px
// track_stats.csv: track_id, duration_min, mean_speed_um_min, total_disp_um
void write_tracks_csv(const std::filesystem::path& path, std::span<const Track> tracks);
std::vector<Track> read_tracks_csv(const std::filesystem::path& path);
void write_track_stats_csv(const std::filesystem::path& path, std::span<const Track> tracks, double pixel_pitch_um,
                           double frame_interval_min);

}  // namespace phagoq::track
