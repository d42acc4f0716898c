#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::synth {

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;  // semi-axis along theta
  double b = 1.0;
  double theta = 0.0;

  // Normalized radius: <= 1 inside.
  double radius_at(double x, double y) const;
};

struct CellRender {
  Raster<std::int32_t> labels;  // ellipse i -> i + 1, overlaps go to the smaller normalized radius
  Raster<float> probability;
};

// Ground-truth instances plus a probability map shaped like the output of a
// border-aware segmentation network: 0.6..1 inside a cell (rising over the
// outer 30% of the radius), dropping towards 0 where two cells meet or
// nearly meet (second-smallest normalized radius close to the smallest), 0
// outside. `valley` is the width of that dip in normalized-radius units.
CellRender render_cells(int width, int height, std::span<const Ellipse> cells, double valley = 0.4);

struct MovingEllipse {
  Ellipse start;
  double vx = 0.0;
  double vy = 0.0;

  Ellipse at(int t) const;
};

// `count` translating ellipses placed as a chain of touching, partly
// overlapping neighbours. Over all `frames` every centre distance stays at or
// above 0.8 * (a_i + a_j) and every ellipse stays inside the frame.
std::vector<MovingEllipse> random_cell_motion(int width, int height, int count, int frames, std::mt19937_64& rng);

}  // namespace phagoq::synth
