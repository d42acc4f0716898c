#include "phagoq/registration/ecc.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace phagoq::registration {

void CascadeSchedule::validate() const {
  if (stages.empty()) throw InvalidArgument("cascade schedule needs at least one stage");
  if (stages.back() != 0) throw InvalidArgument("the last cascade stage must have kernel size 0");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const int k = stages[i];
    if (k != 0 && (k < 3 || k % 2 == 0)) {
      throw InvalidArgument("cascade kernel sizes must be odd and >= 3 (or 0), got " + std::to_string(k));
    }
    if (i > 0 && k >= stages[i - 1]) throw InvalidArgument("cascade kernel sizes must strictly decrease");
  }
  if (ecc.max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(ecc.epsilon > 0)) throw InvalidArgument("epsilon must be positive");
}

namespace {

void central_differences(const Raster<float>& m, Field& gx, Field& gy, const simd::KernelTable& k) {
  const int w = m.width();
  const int h = m.height();
  gx = Field(w, h);
  gy = Field(w, h);
  for (int y = 0; y < h; ++y) {
    auto src = m.row(y);
    auto dst = gx.row(y);
    if (w >= 3) k.diff_row(src.data() + 2, src.data(), 0.5f, dst.data() + 1, static_cast<std::size_t>(w - 2));
    for (int x : {0, w - 1}) {
      const int xp = border_index(x + 1, w, BorderMode::Reflect);
      const int xm = border_index(x - 1, w, BorderMode::Reflect);
      dst[x] = 0.5f * (src[xp] - src[xm]);
    }
    const int yp = border_index(y + 1, h, BorderMode::Reflect);
    const int ym = border_index(y - 1, h, BorderMode::Reflect);
    k.diff_row(m.row(yp).data(), m.row(ym).data(), 0.5f, gy.row(y).data(), static_cast<std::size_t>(w));
  }
}

// Moment sums of template vs moving sampled at x + p over the valid overlap.
struct Sample {
  simd::MomentSums m{};
  double n = 0.0;
};

class Sampler {
 public:
  Sampler(const EccImage& ref, const EccImage& mov, const simd::KernelTable& k)
      : ref_(ref), mov_(mov), k_(k), img_(ref.region.width), gx_(ref.region.width), gy_(ref.region.width) {}

  // nullopt when the overlap is too small to be meaningful.
  std::optional<Sample> at(double px, double py) {
    const Rect& rr = ref_.region;
    const Rect& mr = mov_.region;
    const int fw = ref_.frame_width;
    const int fh = ref_.frame_height;
    if (!std::isfinite(px) || !std::isfinite(py) || std::abs(px) >= fw || std::abs(py) >= fh) return std::nullopt;
    const double fx0 = std::floor(px);
    const double fy0 = std::floor(py);
    const float fx = static_cast<float>(px - fx0);
    const float fy = static_cast<float>(py - fy0);
    const int sx = fx > 0.0f ? 1 : 0;
    const int sy = fy > 0.0f ? 1 : 0;
    // Template pixel x samples moving-region column x + jx (+ fx).
    const int jx = static_cast<int>(fx0) - mr.x0;
    const int jy = static_cast<int>(fy0) - mr.y0;
    const int xa = std::max(rr.x0, -jx);
    const int xb = std::min(rr.x0 + rr.width - 1, mr.width - 1 - jx - sx);
    const int ya = std::max(rr.y0, -jy);
    const int yb = std::min(rr.y0 + rr.height - 1, mr.height - 1 - jy - sy);
    if (xa > xb || ya > yb) return std::nullopt;
    const std::size_t n = static_cast<std::size_t>(xb - xa + 1);
    const double count = static_cast<double>(n) * (yb - ya + 1);
    if (count < std::max(16.0, 0.05 * fw * fh)) return std::nullopt;

    const float w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy), w10 = (1 - fx) * fy, w11 = fx * fy;
    Sample s;
    s.n = count;
    for (int y = ya; y <= yb; ++y) {
      const int r0 = y + jy;
      const int r1 = r0 + sy;
      const int c0 = xa + jx;
      const int c1 = c0 + sx;
      blend(mov_.image, r0, r1, c0, c1, w00, w01, w10, w11, img_.data(), n);
      blend(mov_.gx, r0, r1, c0, c1, w00, w01, w10, w11, gx_.data(), n);
      blend(mov_.gy, r0, r1, c0, c1, w00, w01, w10, w11, gy_.data(), n);
      k_.ecc_moments(ref_.image.row(y - rr.y0).data() + (xa - rr.x0), img_.data(), gx_.data(), gy_.data(), n, s.m);
    }
    return s;
  }

 private:
  void blend(const Raster<float>& src, int r0, int r1, int c0, int c1, float w00, float w01, float w10, float w11,
             float* dst, std::size_t n) const {
    const float* a = src.row(r0).data();
    const float* b = src.row(r1).data();
    k_.blend4_row(a + c0, a + c1, b + c0, b + c1, w00, w01, w10, w11, dst, n);
  }

  const EccImage& ref_;
  const EccImage& mov_;
  const simd::KernelTable& k_;
  std::vector<float> img_, gx_, gy_;
};

struct Stats {
  double rho = 0.0;
  double dx = 0.0;  // Gauss-Newton update
  double dy = 0.0;
  bool step_ok = false;
};

// rho and the ECC update from one set of moment sums.
Stats analyze(const Sample& s) {
  using namespace simd;
  const auto& m = s.m;
  const double n = s.n;
  const double tbar = m[kSumT] / n;
  const double ibar = m[kSumI] / n;
  const double tnorm2 = m[kSumTT] - n * tbar * tbar;
  const double inorm2 = m[kSumII] - n * ibar * ibar;
  const double corr = m[kSumTI] - n * tbar * ibar;
  const double tiny = 1e-18 * n;
  if (!(tnorm2 > tiny) || !(inorm2 > tiny)) throw DegenerateInput("ECC: image has no variance over the overlap");
  Stats st;
  st.rho = std::clamp(corr / std::sqrt(tnorm2 * inorm2), -1.0, 1.0);

  const double h00 = m[kSumGxGx], h01 = m[kSumGxGy], h11 = m[kSumGyGy];
  const double det = h00 * h11 - h01 * h01;
  if (!(std::abs(det) > 1e-30)) return st;
  const double i00 = h11 / det, i01 = -h01 / det, i11 = h00 / det;
  const double pi0 = m[kSumGxI] - ibar * m[kSumGx];
  const double pi1 = m[kSumGyI] - ibar * m[kSumGy];
  const double pt0 = m[kSumGxT] - tbar * m[kSumGx];
  const double pt1 = m[kSumGyT] - tbar * m[kSumGy];
  const double q0 = i00 * pi0 + i01 * pi1;
  const double q1 = i01 * pi0 + i11 * pi1;
  const double num = inorm2 - (pi0 * q0 + pi1 * q1);
  const double den = corr - (pt0 * q0 + pt1 * q1);
  double lambda = 0.0;
  if (den > 0.0) {
    lambda = num / den;
  } else {
    // Correlation too weak for the ratio form; use the norm-matching scale,
    // which still yields an ascent direction.
    const double qt0 = i00 * pt0 + i01 * pt1;
    const double qt1 = i01 * pt0 + i11 * pt1;
    const double tden = tnorm2 - (pt0 * qt0 + pt1 * qt1);
    if (!(tden > 0.0) || !(num > 0.0)) return st;
    lambda = std::sqrt(num / tden);
  }
  const double e0 = lambda * pt0 - pi0;
  const double e1 = lambda * pt1 - pi1;
  st.dx = i00 * e0 + i01 * e1;
  st.dy = i01 * e0 + i11 * e1;
  st.step_ok = std::isfinite(st.dx) && std::isfinite(st.dy);
  return st;
}

constexpr int kMaxHalvings = 10;

}  // namespace

Rect valid_after_warp(int width, int height, double dx, double dy) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(dx)));
  const int x1 = std::min(width - 1, static_cast<int>(std::floor(width - 1 + dx)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(dy)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(height - 1 + dy)));
  if (x1 < x0 || y1 < y0) throw InvalidArgument("valid_after_warp: shift leaves no valid pixels");
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

EccImage prepare(const Frame& frame, const GaussianSpec& smoothing, const Rect& region, BorderMode border,
                 const simd::KernelTable& k) {
  if (region.width < 2 || region.height < 2 || region.x0 < 0 || region.y0 < 0 ||
      region.x0 + region.width > frame.width() || region.y0 + region.height > frame.height()) {
    throw InvalidArgument("prepare: region must be at least 2x2 and inside the frame");
  }
  EccImage e;
  e.region = region;
  e.frame_width = frame.width();
  e.frame_height = frame.height();
  Frame crop;
  if (region.width == frame.width() && region.height == frame.height()) {
    crop = frame;
  } else {
    crop = Frame(region.width, region.height);
    for (int y = 0; y < region.height; ++y) {
      auto src = frame.row(region.y0 + y);
      std::copy_n(src.begin() + region.x0, region.width, crop.row(y).begin());
    }
  }
  e.image = smoothing.enabled() ? gaussian_smooth(crop, smoothing, border, k) : std::move(crop);
  central_differences(e.image, e.gx, e.gy, k);
  return e;
}

EccImage prepare(const Frame& frame, const GaussianSpec& smoothing, BorderMode border, const simd::KernelTable& k) {
  return prepare(frame, smoothing, Rect{0, 0, frame.width(), frame.height()}, border, k);
}

Pyramid prepare_pyramid(const Frame& frame, const CascadeSchedule& schedule, const Rect& region,
                        const simd::KernelTable& k) {
  schedule.validate();
  Pyramid p;
  p.levels.reserve(schedule.stages.size());
  for (int ks : schedule.stages) {
    p.levels.push_back(prepare(frame, GaussianSpec::from_kernel_size(ks), region, BorderMode::Reflect, k));
  }
  return p;
}

Pyramid prepare_pyramid(const Frame& frame, const CascadeSchedule& schedule, const simd::KernelTable& k) {
  return prepare_pyramid(frame, schedule, Rect{0, 0, frame.width(), frame.height()}, k);
}

WarpEstimate ecc_translate(const EccImage& reference, const EccImage& moving, double init_dx, double init_dy,
                           const EccOptions& options, const simd::KernelTable& k) {
  if (reference.frame_width != moving.frame_width || reference.frame_height != moving.frame_height) {
    throw InvalidArgument("ecc_translate: frame dimensions differ");
  }
  if (options.max_iterations < 1) throw InvalidArgument("ecc_translate: max_iterations must be >= 1");
  Sampler sampler(reference, moving, k);
  WarpEstimate est;
  est.dx = init_dx;
  est.dy = init_dy;

  auto first = sampler.at(init_dx, init_dy);
  if (!first) {
    est.note = "no overlap at initial estimate";
    est.rho = std::nan("");
    return est;
  }
  Stats cur = analyze(*first);
  est.rho = cur.rho;
  est.rho_trace.push_back(cur.rho);

  while (est.iterations < options.max_iterations) {
    if (!cur.step_ok) {
      est.note = "ill-conditioned update";
      return est;
    }
    // Backtrack along the Gauss-Newton direction until rho does not drop.
    double scale = 1.0;
    const double len = std::hypot(cur.dx, cur.dy);
    if (options.max_step > 0.0 && len > options.max_step) scale = options.max_step / len;
    std::optional<Stats> next;
    double nx = 0.0, ny = 0.0;
    for (int h = 0; h <= kMaxHalvings; ++h, scale *= 0.5) {
      nx = est.dx + scale * cur.dx;
      ny = est.dy + scale * cur.dy;
      auto s = sampler.at(nx, ny);
      if (!s) continue;
      Stats cand;
      try {
        cand = analyze(*s);
      } catch (const DegenerateInput&) {
        continue;
      }
      if (cand.rho >= cur.rho) {
        next = cand;
        break;
      }
    }
    ++est.iterations;
    if (!next) {
      // No ascent along the update: already at the local optimum.
      est.converged = true;
      est.note = "no ascent step";
      return est;
    }
    const double gain = next->rho - cur.rho;
    est.dx = nx;
    est.dy = ny;
    est.rho = next->rho;
    est.rho_trace.push_back(next->rho);
    cur = *next;
    if (gain < options.epsilon) {
      est.converged = true;
      return est;
    }
  }
  est.note = "iteration cap reached";
  return est;
}

WarpEstimate ecc_translate(const Frame& reference, const Frame& moving, double init_dx, double init_dy,
                           const EccOptions& options, const simd::KernelTable& k) {
  if (!reference.same_shape(moving)) throw InvalidArgument("ecc_translate: frame dimensions differ");
  return ecc_translate(prepare(reference, GaussianSpec::none(), BorderMode::Reflect, k),
                       prepare(moving, GaussianSpec::none(), BorderMode::Reflect, k), init_dx, init_dy, options, k);
}

CascadeEstimate cecc(const Pyramid& reference, const Pyramid& moving, const CascadeSchedule& schedule,
                     const simd::KernelTable& k) {
  schedule.validate();
  if (reference.levels.size() != schedule.stages.size() || moving.levels.size() != schedule.stages.size()) {
    throw InvalidArgument("cecc: pyramid depth does not match the schedule");
  }
  CascadeEstimate out;
  double px = 0.0, py = 0.0;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    WarpEstimate e;
    try {
      EccOptions opts = schedule.ecc;
      if (schedule.stages[i] > 0) opts.max_step = gaussian_sigma(schedule.stages[i]);
      e = ecc_translate(reference.levels[i], moving.levels[i], px, py, opts, k);
    } catch (const DegenerateInput& ex) {
      throw DegenerateInput("cecc stage " + std::to_string(i) + " (kernel " + std::to_string(schedule.stages[i]) +
                            "): " + ex.what());
    }
    if (std::isfinite(e.dx) && std::isfinite(e.dy)) {
      px = e.dx;
      py = e.dy;
    }
    out.stages.push_back({schedule.stages[i], e});
  }
  out.final = out.stages.back().estimate;
  return out;
}

CascadeEstimate cecc(const Frame& reference, const Frame& moving, const CascadeSchedule& schedule,
                     const simd::KernelTable& k) {
  if (!reference.same_shape(moving)) throw InvalidArgument("cecc: frame dimensions differ");
  return cecc(prepare_pyramid(reference, schedule, k), prepare_pyramid(moving, schedule, k), schedule, k);
}

double correlation_at(const Frame& reference, const Frame& moving, double dx, double dy) {
  const EccImage r = prepare(reference, GaussianSpec::none());
  const EccImage m = prepare(moving, GaussianSpec::none());
  Sampler s(r, m, simd::active());
  auto sample = s.at(dx, dy);
  if (!sample) throw InvalidArgument("correlation_at: no overlap");
  return analyze(*sample).rho;
}

}  // namespace phagoq::registration
