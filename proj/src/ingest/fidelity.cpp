#include "phagoq/ingest/fidelity.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "phagoq/ingest/image_io.hpp"

namespace phagoq::ingest {

std::string FidelityReport::psnr_text() const {
  if (perfect) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", psnr_db);
  return buf;
}

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Mean SSIM over all 7x7 windows. Column sums are recomputed for every
// window row rather than slid, so there is no accumulated drift.
double mean_ssim(const Raster<float>& a, const Raster<float>& b) {
  const int w = a.width();
  const int h = a.height();
  constexpr int k = kSsimWindow;
  constexpr double np = k * k;
  constexpr double cov_norm = np / (np - 1.0);
  std::vector<double> ca(w), cb(w), caa(w), cbb(w), cab(w);
  double total = 0.0;
  for (int y0 = 0; y0 + k <= h; ++y0) {
    std::fill(ca.begin(), ca.end(), 0.0);
    std::fill(cb.begin(), cb.end(), 0.0);
    std::fill(caa.begin(), caa.end(), 0.0);
    std::fill(cbb.begin(), cbb.end(), 0.0);
    std::fill(cab.begin(), cab.end(), 0.0);
    for (int y = y0; y < y0 + k; ++y) {
      auto ra = a.row(y);
      auto rb = b.row(y);
      for (int x = 0; x < w; ++x) {
        const double va = ra[x];
        const double vb = rb[x];
        ca[x] += va;
        cb[x] += vb;
        caa[x] += va * va;
        cbb[x] += vb * vb;
        cab[x] += va * vb;
      }
    }
    for (int x0 = 0; x0 + k <= w; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int x = x0; x < x0 + k; ++x) {
        sa += ca[x];
        sb += cb[x];
        saa += caa[x];
        sbb += cbb[x];
        sab += cab[x];
      }
      const double ux = sa / np;
      const double uy = sb / np;
      const double vx = cov_norm * (saa / np - ux * ux);
      const double vy = cov_norm * (sbb / np - uy * uy);
      const double vxy = cov_norm * (sab / np - ux * uy);
      total += ((2 * ux * uy + kC1) * (2 * vxy + kC2)) / ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
    }
  }
  const double windows = static_cast<double>(w - k + 1) * static_cast<double>(h - k + 1);
  return total / windows;
}

}  // namespace

FidelityReport assess_fidelity(const Raster<float>& a, const Raster<float>& b) {
  if (!a.same_shape(b)) throw InvalidArgument("assess_fidelity: image dimensions differ");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw InvalidArgument("assess_fidelity: images must be at least 7x7");
  }
  FidelityReport r;
  double se = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    se += d * d;
  }
  r.mse = se / static_cast<double>(pa.size());
  r.perfect = r.mse == 0.0;
  r.psnr_db = r.perfect ? 0.0 : -10.0 * std::log10(r.mse);
  r.ssim = mean_ssim(a, b);
  return r;
}

Frame to_u8(const Frame& frame) {
  Frame out = frame.like();
  out.bit_depth_origin = BitDepth::U8;
  auto src = frame.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(io::quantize_u8(src[i]) / 255.0);
  return out;
}

U8Conversion to_u8_checked(const Frame& frame) {
  U8Conversion c{to_u8(frame), {}};
  c.fidelity = assess_fidelity(frame, c.frame);
  return c;
}

}  // namespace phagoq::ingest
