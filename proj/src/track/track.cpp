#include "phagoq/track/track.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "phagoq/error.hpp"
#include "phagoq/util/csv.hpp"

namespace phagoq::track {

double Track::duration_min(double frame_interval_min) const {
  if (observations.empty()) return 0.0;
  return (observations.back().t - observations.front().t) * frame_interval_min;
}

std::vector<Track> link_tracks(std::span<const FrameDetections> frames, const LinkOptions& options) {
  if (!(options.gate_px >= 0.0)) throw InvalidArgument("gate_px must be >= 0");
  if (options.max_gap_frames < 0) throw InvalidArgument("max_gap_frames must be >= 0");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].t <= frames[i - 1].t) throw InvalidArgument("link_tracks: frames must be sorted by t");
  }

  std::vector<Track> tracks;
  struct Active {
    std::size_t track;
    std::size_t last_entry;
  };
  std::vector<Active> active;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& dets = frames[f].detections;
    active.erase(std::remove_if(active.begin(), active.end(),
                                [&](const Active& a) {
                                  return f - a.last_entry - 1 > static_cast<std::size_t>(options.max_gap_frames);
                                }),
                 active.end());

    struct Candidate {
      double d;
      int track_id;
      std::size_t det, slot;
    };
    std::vector<Candidate> cand;
    for (std::size_t s = 0; s < active.size(); ++s) {
      const Track& tr = tracks[active[s].track];
      const Point2 p = tr.observations.back().position;
      for (std::size_t j = 0; j < dets.size(); ++j) {
        const double d = std::hypot(dets[j].position.x - p.x, dets[j].position.y - p.y);
        if (d <= options.gate_px) cand.push_back({d, tr.id, j, s});
      }
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.d, a.track_id, a.det) < std::tie(b.d, b.track_id, b.det);
    });
    std::vector<char> used_det(dets.size(), 0), used_slot(active.size(), 0);
    for (const auto& c : cand) {
      if (used_det[c.det] || used_slot[c.slot]) continue;
      used_det[c.det] = used_slot[c.slot] = 1;
      Active& a = active[c.slot];
      const Detection& d = dets[c.det];
      tracks[a.track].observations.push_back({frames[f].t, d.instance_id, d.position, d.area_px});
      a.last_entry = f;
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (used_det[j]) continue;
      Track tr;
      tr.id = static_cast<int>(tracks.size()) + 1;
      tr.observations.push_back({frames[f].t, dets[j].instance_id, dets[j].position, dets[j].area_px});
      tracks.push_back(std::move(tr));
      active.push_back({tracks.size() - 1, f});
    }
  }
  return tracks;
}

std::vector<Track> filter_tracks(std::span<const Track> tracks, double min_duration_min, double frame_interval_min) {
  std::vector<Track> out;
  for (const auto& t : tracks) {
    if (t.duration_min(frame_interval_min) >= min_duration_min) out.push_back(t);
  }
  return out;
}

Motility motility_stats(const Track& track, double pixel_pitch_um, double frame_interval_min) {
  if (!(pixel_pitch_um > 0.0) || !(frame_interval_min > 0.0)) {
    throw InvalidArgument("pixel pitch and frame interval must be positive");
  }
  Motility m;
  const auto& obs = track.observations;
  if (obs.size() < 2) return m;
  m.defined = true;
  double speed_sum = 0.0;
  for (std::size_t i = 1; i < obs.size(); ++i) {
    const double step = std::hypot(obs[i].position.x - obs[i - 1].position.x,
                                   obs[i].position.y - obs[i - 1].position.y) * pixel_pitch_um;
    m.total_displacement_um += step;
    speed_sum += step / ((obs[i].t - obs[i - 1].t) * frame_interval_min);
  }
  m.mean_speed_um_per_min = speed_sum / static_cast<double>(obs.size() - 1);
  return m;
}

std::vector<MotilityPoint> motility_curve(std::span<const Track> tracks, std::span<const int> frame_ts,
                                          double pixel_pitch_um, double frame_interval_min) {
  struct Acc {
    double speed = 0.0;
    int steps = 0;
    double path = 0.0;
    int tracks = 0;
  };
  std::map<int, Acc> acc;
  for (int t : frame_ts) acc[t];
  for (const auto& tr : tracks) {
    double path = 0.0;
    for (std::size_t i = 0; i < tr.observations.size(); ++i) {
      const auto& o = tr.observations[i];
      auto it = acc.find(o.t);
      if (i > 0) {
        const auto& p = tr.observations[i - 1];
        const double step = std::hypot(o.position.x - p.position.x, o.position.y - p.position.y) * pixel_pitch_um;
        path += step;
        if (it != acc.end()) {
          it->second.speed += step / ((o.t - p.t) * frame_interval_min);
          ++it->second.steps;
        }
      }
      if (it != acc.end()) {
        it->second.path += path;
        ++it->second.tracks;
      }
    }
  }
  std::vector<MotilityPoint> out;
  for (int t : frame_ts) {
    const Acc& a = acc[t];
    out.push_back({t, a.steps ? a.speed / a.steps : 0.0, a.tracks ? a.path / a.tracks : 0.0, a.tracks});
  }
  return out;
}

void write_tracks_csv(const std::filesystem::path& path, std::span<const Track> tracks) {
  csv::Writer w(path, {"track_id", "t", "x", "y", "area_px"});
  for (const auto& tr : tracks) {
    for (const auto& o : tr.observations) {
      w.row({csv::num(tr.id), csv::num(o.t), csv::num(o.position.x, 9), csv::num(o.position.y, 9),
             csv::num(static_cast<long long>(o.area_px))});
    }
  }
  w.close();
}

std::vector<Track> read_tracks_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ci = tab.column("track_id"), ct = tab.column("t"), cx = tab.column("x"), cy = tab.column("y"),
                    ca = tab.column("area_px");
  std::map<int, Track> by_id;
  for (const auto& r : tab.rows) {
    const int id = static_cast<int>(csv::to_int(r[ci]));
    Track& tr = by_id[id];
    tr.id = id;
    Observation o;
    o.t = static_cast<int>(csv::to_int(r[ct]));
    o.position = {csv::to_double(r[cx]), csv::to_double(r[cy])};
    o.area_px = csv::to_int(r[ca]);
    tr.observations.push_back(o);
  }
  std::vector<Track> out;
  for (auto& [id, tr] : by_id) out.push_back(std::move(tr));
  return out;
}

void write_track_stats_csv(const std::filesystem::path& path, std::span<const Track> tracks, double pixel_pitch_um,
                           double frame_interval_min) {
  csv::Writer w(path, {"track_id", "duration_min", "mean_speed_um_min", "total_disp_um"});
  for (const auto& tr : tracks) {
    const Motility m = motility_stats(tr, pixel_pitch_um, frame_interval_min);
    const double nan = std::nan("");
    w.row({csv::num(tr.id), csv::num(tr.duration_min(frame_interval_min)),
           csv::num(m.defined ? m.mean_speed_um_per_min : nan), csv::num(m.defined ? m.total_displacement_um : nan)});
  }
  w.close();
}

}  // namespace phagoq::track
