#include "phagoq/synth/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>

#include "phagoq/error.hpp"
#include "phagoq/imgcore/ops.hpp"
#include "phagoq/ingest/image_io.hpp"
#include "phagoq/util/csv.hpp"

namespace phagoq::synth {

namespace fs = std::filesystem;

namespace {

constexpr int kAggCols = 3, kAggRows = 4, kTiles = 4;
constexpr int kHalfMoveY = 8;

struct Rect {
  int x0, y0, w, h;
};

fs::path frame_file(const fs::path& dir, int t) {
  char name[32];
  std::snprintf(name, sizeof name, "t%04d.tif", t);
  return dir / name;
}

void fill(Raster<float>& img, const Rect& r, int dx, int dy, float v) {
  for (int y = r.y0 + dy; y < r.y0 + dy + r.h; ++y) {
    for (int x = r.x0 + dx; x < r.x0 + dx + r.w; ++x) img.at(x, y) = v;
  }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::seed_seq seq{a, b, c, std::uint64_t{0x5eed}};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Everything about a scene that does not depend on the condition.
struct Layout {
  std::vector<std::pair<int, int>> drift;  // per frame
  std::vector<std::pair<int, int>> agg_origin;  // slot-relative origin already applied
  std::vector<int> cell_tile;
  std::vector<std::vector<std::pair<int, int>>> cell_origin;  // [cell][t]
};

Layout make_layout(const SynthSpec& spec, int scene) {
  std::mt19937_64 rng(mix(spec.seed, static_cast<std::uint64_t>(scene), 1));
  const int margin = spec.max_drift_px + 4;
  const int inner_w = spec.width - 2 * margin, inner_h = spec.height - 2 * margin;
  Layout L;

  std::pair<int, int> d{0, 0};
  std::uniform_int_distribution<int> step(-1, 1);
  for (int t = 0; t < spec.frames; ++t) {
    if (t > 0) {
      d.first = std::clamp(d.first + step(rng), -spec.max_drift_px, spec.max_drift_px);
      d.second = std::clamp(d.second + step(rng), -spec.max_drift_px, spec.max_drift_px);
    }
    L.drift.push_back(d);
  }

  const int sw = inner_w / kAggCols, sh = inner_h / kAggRows;
  for (int i = 0; i < spec.aggregates; ++i) {
    const int c = i % kAggCols, r = i / kAggCols;
    std::uniform_int_distribution<int> ox(4, sw - 34 - 4), oy(4, sh - 14 - kHalfMoveY - 4);
    L.agg_origin.emplace_back(margin + c * sw + ox(rng), margin + r * sh + oy(rng));
  }

  std::vector<int> tiles(kTiles * kTiles);
  for (int i = 0; i < kTiles * kTiles; ++i) tiles[i] = i;
  std::shuffle(tiles.begin(), tiles.end(), rng);
  tiles.resize(static_cast<std::size_t>(spec.cells));
  std::sort(tiles.begin(), tiles.end());
  L.cell_tile = tiles;
  const int tw = inner_w / kTiles, th = inner_h / kTiles;
  const int lo = 3, hi_x = tw - 26 - 3, hi_y = th - 19 - 3;
  std::uniform_int_distribution<int> sx(lo, hi_x), sy(lo, hi_y), move(0, 9);
  for (int tile : tiles) {
    std::vector<std::pair<int, int>> path;
    int x = sx(rng), y = sy(rng);
    for (int t = 0; t < spec.frames; ++t) {
      if (t > 0) {
        const int m = move(rng);  // 0..3 move one pixel, otherwise stay
        if (m == 0) x = std::min(hi_x, x + 1);
        if (m == 1) x = std::max(lo, x - 1);
        if (m == 2) y = std::min(hi_y, y + 1);
        if (m == 3) y = std::max(lo, y - 1);
      }
      path.emplace_back(margin + (tile % kTiles) * tw + x, margin + (tile / kTiles) * th + y);
    }
    L.cell_origin.push_back(std::move(path));
  }
  return L;
}

}  // namespace

Frame blob_texture(int width, int height, int blobs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width), uy(0.0, height), us(1.5, 5.0), ua(0.3, 0.9);
  Raster<double> acc(width, height, 0.0);
  for (int i = 0; i < blobs; ++i) {
    const double cx = ux(rng), cy = uy(rng), s = us(rng), a = ua(rng);
    const int r = static_cast<int>(std::ceil(4 * s));
    for (int y = std::max(0, static_cast<int>(cy) - r); y < std::min(height, static_cast<int>(cy) + r + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x < std::min(width, static_cast<int>(cx) + r + 1); ++x) {
        acc.at(x, y) += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
      }
    }
  }
  Frame f(width, height);
  for (std::size_t i = 0; i < f.size(); ++i) f.pixels()[i] = static_cast<float>(std::min(1.0, acc.pixels()[i]));
  return f;
}

void SynthSpec::validate() const {
  if (conditions.empty()) throw InvalidArgument("synth: no conditions");
  for (const auto& c : conditions) {
    if (c.name.empty() || c.cell_width < 4 || c.cell_width > 26) throw InvalidArgument("synth: cell_width must lie in [4, 26]");
    if (c.aggregate_width < 2 || c.aggregate_width > 34 || c.aggregate_width % 2) {
      throw InvalidArgument("synth: aggregate_width must be even and lie in [2, 34]");
    }
  }
  if (scenes_per_condition < 1) throw InvalidArgument("synth: scenes_per_condition must be >= 1");
  if (frames < 2) throw InvalidArgument("synth: frames must be >= 2");
  if (max_drift_px < 0) throw InvalidArgument("synth: max_drift_px must be >= 0");
  const int margin = max_drift_px + 4;
  if ((width - 2 * margin) / kTiles < 26 + 8 || (height - 2 * margin) / kTiles < 19 + 8 ||
      (width - 2 * margin) / kAggCols < 34 + 9 || (height - 2 * margin) / kAggRows < 14 + kHalfMoveY + 9) {
    throw InvalidArgument("synth: frame too small for the layout");
  }
  if (cells < 0 || cells > kTiles * kTiles) throw InvalidArgument("synth: cells must lie in [0, 16]");
  if (aggregates < 0 || aggregates > kAggCols * kAggRows) throw InvalidArgument("synth: aggregates must lie in [0, 12]");
  if (events < 0 || events > aggregates) throw InvalidArgument("synth: events must lie in [0, aggregates]");
  if (lookahead_frames < 0) throw InvalidArgument("synth: lookahead_frames must be >= 0");
  if (events > 0 && frames - lookahead_frames - 2 - 2 < 2 * events - 1) {
    throw InvalidArgument("synth: too few frames for the planted events");
  }
  for (int t : blur_frames) {
    if (t <= 0 || t >= frames) throw InvalidArgument("synth: blur frames must lie in [1, frames)");
  }
  if (!(blur_sigma > 0)) throw InvalidArgument("synth: blur_sigma must be > 0");
}

std::vector<PlantedEvent> event_schedule(const SynthSpec& spec) {
  std::vector<PlantedEvent> out;
  if (spec.events == 0) return out;
  const int last = spec.frames - spec.lookahead_frames - 2;
  const int n = 2 * spec.events;
  std::vector<int> s;
  for (int m = 0; m < n; ++m) s.push_back(2 + static_cast<int>(std::lround(m * double(last - 2) / (n - 1))));
  for (int i = 0; i < spec.events; ++i) out.push_back({i + 1, s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(spec.events + i)]});
  return out;
}

void synth_dataset(const fs::path& root, const SynthSpec& spec) {
  spec.validate();
  const auto events = event_schedule(spec);
  const int kernel = 2 * static_cast<int>(std::ceil(3 * spec.blur_sigma)) + 1;
  for (std::size_t ci = 0; ci < spec.conditions.size(); ++ci) {
    const auto& cond = spec.conditions[ci];
    for (int s = 0; s < spec.scenes_per_condition; ++s) {
      char scene_name[32];
      std::snprintf(scene_name, sizeof scene_name, "scene_%02d", s);
      const fs::path dir = root / cond.name / scene_name;
      for (const char* sub : {"aggregates", "cells", "truth/masks"}) fs::create_directories(dir / sub);
      if (spec.probability) fs::create_directories(dir / "probability");

      const Layout L = make_layout(spec, s);
      const int j = s % 5;
      const int agg_h = 10 + j, cell_h = 15 + j;
      std::mt19937_64 noise(mix(spec.seed, ci, static_cast<std::uint64_t>(s) + 1000));
      std::normal_distribution<float> g(0.0f, 1.0f);

      csv::Writer shifts(dir / "truth" / "shifts.csv", {"t", "dx", "dy"});
      csv::Writer blur(dir / "truth" / "blur.csv", {"t"});
      csv::Writer ev(dir / "truth" / "events.csv", {"t", "aggregate", "kind", "area_before_px", "area_after_px",
                                                    "x_before", "y_before", "x_after", "y_after"});
      csv::Writer curve(dir / "truth" / "eaten_curve.csv", {"t", "total_area_px", "eaten_px"});
      csv::Writer cells_truth(dir / "truth" / "cells.csv", {"t", "cell", "area_px", "cx", "cy"});

      auto agg_rect = [&](int a, int t) -> std::optional<Rect> {
        const auto [x0, y0] = L.agg_origin[static_cast<std::size_t>(a)];
        Rect r{x0, y0, cond.aggregate_width, agg_h};
        for (const auto& e : events) {
          if (e.aggregate != a + 1) continue;
          if (t >= e.t_vanish) return std::nullopt;
          if (t >= e.t_half) r = {x0, y0 + kHalfMoveY, cond.aggregate_width / 2, agg_h};
        }
        return r;
      };
      auto centre = [](const Rect& r) { return Point2{r.x0 + (r.w - 1) / 2.0, r.y0 + (r.h - 1) / 2.0}; };

      std::int64_t total0 = 0;
      for (int t = 0; t < spec.frames; ++t) {
        const auto [dx, dy] = L.drift[static_cast<std::size_t>(t)];
        shifts.row({csv::num(t), csv::num(dx), csv::num(dy)});
        const bool blurred = std::find(spec.blur_frames.begin(), spec.blur_frames.end(), t) != spec.blur_frames.end();
        if (blurred) blur.row({csv::num(t)});

        Frame agg(spec.width, spec.height, 0.1f);
        std::int64_t total = 0;
        for (int a = 0; a < spec.aggregates; ++a) {
          const auto r = agg_rect(a, t);
          if (!r) continue;
          fill(agg, *r, dx, dy, 0.8f);
          total += static_cast<std::int64_t>(r->w) * r->h;
        }
        if (t == 0) total0 = total;
        curve.row({csv::num(t), csv::num(static_cast<long long>(total)),
                   csv::num(static_cast<long long>(std::max<std::int64_t>(0, total0 - total)))});
        for (const auto& e : events) {
          for (int te : {e.t_half, e.t_vanish}) {
            if (te != t) continue;
            const auto before = agg_rect(e.aggregate - 1, t - 1);
            const auto after = agg_rect(e.aggregate - 1, t);
            const Point2 cb = centre(*before);
            const Point2 ca = after ? centre(*after) : cb;
            ev.row({csv::num(t), csv::num(e.aggregate), te == e.t_half ? "half" : "vanish",
                    csv::num(static_cast<long long>(before->w) * before->h),
                    csv::num(after ? static_cast<long long>(after->w) * after->h : 0LL), csv::num(cb.x), csv::num(cb.y),
                    csv::num(ca.x), csv::num(ca.y)});
          }
        }

        Frame cells(spec.width, spec.height, 0.15f);
        Raster<float> prob(spec.width, spec.height, 0.0f);
        Raster<std::int32_t> labels(spec.width, spec.height, 0);
        for (int c = 0; c < spec.cells; ++c) {
          const auto [x0, y0] = L.cell_origin[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)];
          const Rect r{x0, y0, cond.cell_width, cell_h};
          fill(cells, r, dx, dy, 0.7f);
          fill(prob, r, dx, dy, 0.7f);
          fill(prob, Rect{x0 + 1, y0 + 1, r.w - 2, r.h - 2}, dx, dy, 0.95f);
          for (int y = y0 + dy; y < y0 + dy + r.h; ++y) {
            for (int x = x0 + dx; x < x0 + dx + r.w; ++x) labels.at(x, y) = c + 1;
          }
          const Point2 cc = centre(r);
          cells_truth.row({csv::num(t), csv::num(c + 1), csv::num(static_cast<long long>(r.w) * r.h), csv::num(cc.x),
                           csv::num(cc.y)});
        }

        for (auto& v : agg.pixels()) v = std::clamp(v + 0.003f * g(noise), 0.0f, 1.0f);
        for (auto& v : cells.pixels()) v = std::clamp(v + 0.01f * g(noise), 0.0f, 1.0f);
        if (blurred) {
          const GaussianSpec gs{kernel, spec.blur_sigma};
          agg = gaussian_smooth(agg, gs);
          cells = gaussian_smooth(cells, gs);
        }
        io::write_tiff(frame_file(dir / "aggregates", t), agg, io::SampleFormat::U16);
        io::write_tiff(frame_file(dir / "cells", t), cells, io::SampleFormat::U16);
        if (spec.probability) io::write_tiff(frame_file(dir / "probability", t), prob, io::SampleFormat::U16);
        io::write_labels(frame_file(dir / "truth" / "masks", t), labels);
      }
      shifts.close();
      blur.close();
      ev.close();
      curve.close();
      cells_truth.close();
    }
  }
}

}  // namespace phagoq::synth
