#include "phagoq/aggregates/aggregates.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "phagoq/util/csv.hpp"

namespace phagoq::aggregates {

LabelMap segment_aggregates(const Frame& frame, const SegmentOptions& options) {
  if (options.min_area_px < 1) throw InvalidArgument("min_area_px must be >= 1");
  LabelMap labels = label_components(threshold(frame, options.threshold), options.connectivity);
  if (options.min_area_px == 1 || labels.max_label == 0) return labels;

  std::vector<std::int64_t> area(static_cast<std::size_t>(labels.max_label) + 1, 0);
  for (auto l : labels.labels.pixels()) ++area[static_cast<std::size_t>(l)];
  std::vector<std::int32_t> remap(area.size(), 0);
  std::int32_t next = 0;
  for (std::size_t l = 1; l < area.size(); ++l) {
    if (area[l] >= options.min_area_px) remap[l] = ++next;
  }
  for (auto& l : labels.labels.pixels()) l = remap[static_cast<std::size_t>(l)];
  labels.max_label = next;
  return labels;
}

namespace {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

Pairing match_aggregates(std::span<const RegionFeatures> prev, std::span<const RegionFeatures> curr,
                         double max_distance_px) {
  if (!(max_distance_px >= 0.0)) throw InvalidArgument("max_distance_px must be >= 0");
  struct Candidate {
    double d;
    std::int32_t p, c;
    std::size_t pi, ci;
  };
  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    for (std::size_t j = 0; j < curr.size(); ++j) {
      const double d = distance(prev[i].centroid, curr[j].centroid);
      if (d <= max_distance_px) cand.push_back({d, prev[i].label, curr[j].label, i, j});
    }
  }
  std::sort(cand.begin(), cand.end(),
            [](const Candidate& a, const Candidate& b) { return std::tie(a.d, a.p, a.c) < std::tie(b.d, b.p, b.c); });

  std::vector<char> used_p(prev.size(), 0), used_c(curr.size(), 0);
  Pairing out;
  for (const auto& c : cand) {
    if (used_p[c.pi] || used_c[c.ci]) continue;
    used_p[c.pi] = used_c[c.ci] = 1;
    out.pairs.push_back({c.p, c.c, c.d});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.prev_label < b.prev_label; });
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!used_p[i]) out.unmatched_prev.push_back(prev[i].label);
  }
  for (std::size_t j = 0; j < curr.size(); ++j) {
    if (!used_c[j]) out.unmatched_curr.push_back(curr[j].label);
  }
  return out;
}

std::string rule_name(EventRule r) { return r == EventRule::Disjunction ? "disjunction" : "conjunction"; }

EventRule parse_rule(const std::string& name) {
  if (name == "conjunction") return EventRule::Conjunction;
  if (name == "disjunction") return EventRule::Disjunction;
  throw InvalidArgument("unknown event rule '" + name + "' (expected conjunction or disjunction)");
}

std::vector<PhagocytosisEvent> detect_phagocytosis(std::span<const RegionFeatures> prev,
                                                   std::span<const RegionFeatures> curr, const Pairing& pairing,
                                                   double pixel_pitch_um, const EventCriteria& criteria, int t) {
  if (!(pixel_pitch_um > 0.0)) throw InvalidArgument("pixel pitch must be positive");
  std::unordered_map<std::int32_t, const RegionFeatures*> by_prev, by_curr;
  for (const auto& r : prev) by_prev[r.label] = &r;
  for (const auto& r : curr) by_curr[r.label] = &r;
  auto lookup = [](const auto& map, std::int32_t label) {
    const auto it = map.find(label);
    if (it == map.end()) throw InvalidArgument("pairing refers to unknown label " + std::to_string(label));
    return it->second;
  };

  std::vector<PhagocytosisEvent> events;
  for (const auto& p : pairing.pairs) {
    const RegionFeatures* a = lookup(by_prev, p.prev_label);
    const RegionFeatures* b = lookup(by_curr, p.curr_label);
    const bool shrunk = static_cast<double>(b->area_px) <= criteria.area_ratio * static_cast<double>(a->area_px);
    const double disp_um = distance(a->centroid, b->centroid) * pixel_pitch_um;
    const bool moved = disp_um >= criteria.min_displacement_um;
    const bool fire = criteria.rule == EventRule::Conjunction ? (shrunk && moved) : (shrunk || moved);
    if (fire) events.push_back({t, a->label, a->area_px, b->area_px, disp_um, a->centroid});
  }
  for (std::int32_t l : pairing.unmatched_prev) {
    const RegionFeatures* a = lookup(by_prev, l);
    events.push_back({t, a->label, a->area_px, 0, 0.0, a->centroid});
  }
  std::sort(events.begin(), events.end(),
            [](const PhagocytosisEvent& x, const PhagocytosisEvent& y) { return x.prev_label < y.prev_label; });
  return events;
}

std::vector<CurvePoint> area_eaten_curve(std::span<const FrameAggregates> frames,
                                         std::span<const PhagocytosisEvent> events, double pixel_pitch_um) {
  std::vector<CurvePoint> curve;
  if (frames.empty()) return curve;
  auto total = [](const FrameAggregates& f) {
    std::int64_t s = 0;
    for (const auto& r : f.regions) s += r.area_px;
    return s;
  };
  const std::int64_t initial = total(frames.front());
  const double px_area = pixel_pitch_um * pixel_pitch_um;
  std::size_t e = 0;
  int seen = 0;
  for (const auto& f : frames) {
    while (e < events.size() && events[e].t <= f.t) {
      ++seen;
      ++e;
    }
    CurvePoint c;
    c.t = f.t;
    c.total_area_px = total(f);
    c.eaten_px = std::max<std::int64_t>(0, initial - c.total_area_px);
    c.eaten_um2 = static_cast<double>(c.eaten_px) * px_area;
    c.events_to_date = seen;
    curve.push_back(c);
  }
  return curve;
}

AggregateAnalysis analyze_aggregates(std::span<const FrameAggregates> frames, double pixel_pitch_um,
                                     const EventCriteria& criteria, double max_distance_px) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].t <= frames[i - 1].t) throw InvalidArgument("analyze_aggregates: frames must be sorted by t");
  }
  AggregateAnalysis out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& cur = frames[i];
    std::unordered_map<std::int32_t, std::int32_t> matched;
    if (i > 0) {
      const auto& prev = frames[i - 1];
      const Pairing pairing = match_aggregates(prev.regions, cur.regions, max_distance_px);
      for (const auto& p : pairing.pairs) matched[p.curr_label] = p.prev_label;
      auto ev = detect_phagocytosis(prev.regions, cur.regions, pairing, pixel_pitch_um, criteria, cur.t);
      out.events.insert(out.events.end(), ev.begin(), ev.end());
    }
    for (const auto& r : cur.regions) {
      AggregateRecord rec{cur.t, r.label, r.area_px, r.centroid, std::nullopt};
      if (const auto it = matched.find(r.label); it != matched.end()) rec.matched_prev = it->second;
      out.records.push_back(rec);
    }
  }
  out.curve = area_eaten_curve(frames, out.events, pixel_pitch_um);
  return out;
}

void write_aggregates_csv(const std::filesystem::path& path, std::span<const AggregateRecord> records) {
  csv::Writer w(path, {"t", "label", "area_px", "cx", "cy", "matched_prev"});
  for (const auto& r : records) {
    w.row({csv::num(r.t), csv::num(static_cast<long long>(r.label)), csv::num(static_cast<long long>(r.area_px)),
           csv::num(r.centroid.x, 9), csv::num(r.centroid.y, 9),
           r.matched_prev ? csv::num(static_cast<long long>(*r.matched_prev)) : std::string()});
  }
  w.close();
}

void write_events_csv(const std::filesystem::path& path, std::span<const PhagocytosisEvent> events) {
  csv::Writer w(path, {"t", "prev_label", "area_before", "area_after", "disp_um"});
  for (const auto& e : events) {
    w.row({csv::num(e.t), csv::num(static_cast<long long>(e.prev_label)),
           csv::num(static_cast<long long>(e.area_before_px)), csv::num(static_cast<long long>(e.area_after_px)),
           csv::num(e.displacement_um)});
  }
  w.close();
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  csv::Writer w(path, {"t", "total_area_px", "eaten_px", "eaten_um2"});
  for (const auto& c : curve) {
    w.row({csv::num(c.t), csv::num(static_cast<long long>(c.total_area_px)),
           csv::num(static_cast<long long>(c.eaten_px)), csv::num(c.eaten_um2, 9)});
  }
  w.close();
}

std::vector<PhagocytosisEvent> read_events_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t"), cl = tab.column("prev_label"), cb = tab.column("area_before"),
                    ca = tab.column("area_after"), cd = tab.column("disp_um");
  std::vector<PhagocytosisEvent> out;
  for (const auto& r : tab.rows) {
    PhagocytosisEvent e;
    e.t = static_cast<int>(csv::to_int(r[ct]));
    e.prev_label = static_cast<std::int32_t>(csv::to_int(r[cl]));
    e.area_before_px = csv::to_int(r[cb]);
    e.area_after_px = csv::to_int(r[ca]);
    e.displacement_um = csv::to_double(r[cd]);
    out.push_back(e);
  }
  return out;
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path, double pixel_pitch_um) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t"), ca = tab.column("total_area_px"), ce = tab.column("eaten_px");
  std::vector<CurvePoint> out;
  for (const auto& r : tab.rows) {
    CurvePoint c;
    c.t = static_cast<int>(csv::to_int(r[ct]));
    c.total_area_px = csv::to_int(r[ca]);
    c.eaten_px = csv::to_int(r[ce]);
    c.eaten_um2 = static_cast<double>(c.eaten_px) * pixel_pitch_um * pixel_pitch_um;
    out.push_back(c);
  }
  return out;
}

}  // namespace phagoq::aggregates
