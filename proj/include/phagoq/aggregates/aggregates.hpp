#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phagoq/imgcore/ops.hpp"

namespace phagoq::aggregates {

struct SegmentOptions {
  float threshold = 0.5f;
  std::int64_t min_area_px = 1;
  Connectivity connectivity = Connectivity::Eight;
};

// Threshold (>=) then connected components; components smaller than
// min_area_px are dropped and the rest relabeled 1..n in raster order.
LabelMap segment_aggregates(const Frame& frame, const SegmentOptions& options = {});

inline constexpr double kDefaultMatchDistancePx = 20.0;

struct MatchedPair {
  std::int32_t prev_label = 0;
  std::int32_t curr_label = 0;
  double distance_px = 0.0;
};

struct Pairing {
  std::vector<MatchedPair> pairs;  // sorted by prev_label
  std::vector<std::int32_t> unmatched_prev;
  std::vector<std::int32_t> unmatched_curr;
};

// Greedy nearest-centroid matching: candidate pairs within max_distance_px
// are taken in order of (distance, prev label, curr label), each label at
// most once.
Pairing match_aggregates(std::span<const RegionFeatures> prev, std::span<const RegionFeatures> curr,
                         double max_distance_px = kDefaultMatchDistancePx);

enum class EventRule : std::uint8_t { Conjunction, Disjunction };
std::string rule_name(EventRule r);
EventRule parse_rule(const std::string& name);

struct EventCriteria {
  double area_ratio = 0.5;           // area_after <= ratio * area_before
  double min_displacement_um = 0.7;  // centroid movement
  EventRule rule = EventRule::Conjunction;
};

struct PhagocytosisEvent {
  int t = 0;
  std::int32_t prev_label = 0;
  std::int64_t area_before_px = 0;
  std::int64_t area_after_px = 0;  // 0 when the aggregate vanished
  double displacement_um = 0.0;    // 0 when the aggregate vanished
  Point2 position;                 // centroid before the event
};

// Events between two consecutive analyzed frames; `t` is the index of the
// current frame. Unmatched previous aggregates are events with area 0 after.
std::vector<PhagocytosisEvent> detect_phagocytosis(std::span<const RegionFeatures> prev,
                                                   std::span<const RegionFeatures> curr, const Pairing& pairing,
                                                   double pixel_pitch_um, const EventCriteria& criteria, int t);

// Regions of one analyzed frame. Centroids are drift-corrected.
struct FrameAggregates {
  int t = 0;
  std::vector<RegionFeatures> regions;
};

struct AggregateRecord {
  int t = 0;
  std::int32_t label = 0;
  std::int64_t area_px = 0;
  Point2 centroid;
  std::optional<std::int32_t> matched_prev;
};

struct CurvePoint {
  int t = 0;
  std::int64_t total_area_px = 0;
  std::int64_t eaten_px = 0;  // max(0, total(first) - total(t))
  double eaten_um2 = 0.0;
  int events_to_date = 0;
};

std::vector<CurvePoint> area_eaten_curve(std::span<const FrameAggregates> frames,
                                         std::span<const PhagocytosisEvent> events, double pixel_pitch_um);

struct AggregateAnalysis {
  std::vector<AggregateRecord> records;
  std::vector<PhagocytosisEvent> events;
  std::vector<CurvePoint> curve;
};

// Matching and event detection between each pair of consecutive entries of
// `frames` (sorted by t; rejected frames are simply absent).
AggregateAnalysis analyze_aggregates(std::span<const FrameAggregates> frames, double pixel_pitch_um,
                                     const EventCriteria& criteria = {},
                                     double max_distance_px = kDefaultMatchDistancePx);

// aggregates.csv: t, label, area_px, cx, cy, matched_prev
// events.csv: t, prev_label, area_before, area_after, disp_um
// curve.csv: t, total_area_px, eaten_px, eaten_um2
void write_aggregates_csv(const std::filesystem::path& path, std::span<const AggregateRecord> records);
void write_events_csv(const std::filesystem::path& path, std::span<const PhagocytosisEvent> events);
void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);
std::vector<PhagocytosisEvent> read_events_csv(const std::filesystem::path& path);
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path, double pixel_pitch_um);

}  // namespace phagoq::aggregates
