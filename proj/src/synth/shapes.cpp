#include "phagoq/synth/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace phagoq::synth {

double Ellipse::radius_at(double x, double y) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double u = (x - cx) * c + (y - cy) * s;
  const double v = -(x - cx) * s + (y - cy) * c;
  return std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
}

CellRender render_cells(int width, int height, std::span<const Ellipse> cells, double valley) {
  CellRender out{Raster<std::int32_t>(width, height, 0), Raster<float>(width, height, 0.0f)};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double r1 = kInf, r2 = kInf;
      std::int32_t best = 0;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const double r = cells[i].radius_at(x, y);
        if (r < r1) {
          r2 = r1;
          r1 = r;
          best = static_cast<std::int32_t>(i + 1);
        } else if (r < r2) {
          r2 = r;
        }
      }
      if (r1 > 1.0) continue;
      out.labels.at(x, y) = best;
      double p = 0.6 + 0.4 * std::min(1.0, (1.0 - r1) / 0.3);
      p *= std::min(1.0, (r2 - r1) / valley);
      out.probability.at(x, y) = static_cast<float>(p);
    }
  }
  return out;
}

Ellipse MovingEllipse::at(int t) const {
  Ellipse e = start;
  e.cx += vx * t;
  e.cy += vy * t;
  return e;
}

namespace {

bool fits(const MovingEllipse& m, int width, int height, int frames) {
  for (int t = 0; t < frames; ++t) {
    const Ellipse e = m.at(t);
    if (e.cx - e.a < 2 || e.cy - e.a < 2 || e.cx + e.a > width - 3 || e.cy + e.a > height - 3) return false;
  }
  return true;
}

bool apart(const MovingEllipse& m, const std::vector<MovingEllipse>& others, int frames) {
  for (const auto& o : others) {
    for (int t = 0; t < frames; ++t) {
      const Ellipse p = m.at(t), q = o.at(t);
      if (std::hypot(p.cx - q.cx, p.cy - q.cy) < 0.8 * (p.a + q.a)) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<MovingEllipse> random_cell_motion(int width, int height, int count, int frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ua(9.0, 14.0), ratio(0.65, 1.0), angle(0.0, 6.283185307179586),
      unit(0.0, 1.0), gap(0.8, 0.95), jitter(-0.3, 0.3);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double speed = 0.8 * unit(rng);
    const double dir = angle(rng);
    auto make = [&](double cx, double cy, double a) {
      MovingEllipse m;
      m.start = {cx, cy, a, a * ratio(rng), angle(rng)};
      m.vx = speed * std::cos(dir) + jitter(rng);
      m.vy = speed * std::sin(dir) + jitter(rng);
      return m;
    };
    std::vector<MovingEllipse> cells;
    const double a0 = ua(rng);
    cells.push_back(make(a0 + 3 + unit(rng) * (width - 2 * a0 - 6), a0 + 3 + unit(rng) * (height - 2 * a0 - 6), a0));
    if (!fits(cells[0], width, height, frames)) continue;
    int tries = 0;
    while (static_cast<int>(cells.size()) < count && tries < 500) {
      ++tries;
      const auto& anchor = cells[static_cast<std::size_t>(rng() % cells.size())];
      const double a = ua(rng);
      const double d = gap(rng) * (anchor.start.a + a);
      const double phi = angle(rng);
      MovingEllipse m = make(anchor.start.cx + d * std::cos(phi), anchor.start.cy + d * std::sin(phi), a);
      if (fits(m, width, height, frames) && apart(m, cells, frames)) cells.push_back(m);
    }
    if (static_cast<int>(cells.size()) == count) return cells;
  }
  throw InvalidArgument("random_cell_motion: could not place the cells; use a larger frame");
}

}  // namespace phagoq::synth
