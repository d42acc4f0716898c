#include "phagoq/imgcore/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace phagoq {

void Frame::validate() const {
  for (float v : pixels()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InvalidArgument("frame intensity outside [0,1]: " + std::to_string(v));
    }
  }
}

int border_index(int i, int n, BorderMode mode) {
  if (i >= 0 && i < n) return i;
  if (mode == BorderMode::Replicate) return i < 0 ? 0 : n - 1;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

double gaussian_sigma(int kernel_size) {
  if (kernel_size < 3 || kernel_size % 2 == 0) {
    throw InvalidArgument("Gaussian kernel size must be odd and >= 3, got " + std::to_string(kernel_size));
  }
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

GaussianSpec GaussianSpec::from_kernel_size(int kernel_size) {
  if (kernel_size == 0) return none();
  return {kernel_size, gaussian_sigma(kernel_size)};
}

std::vector<float> gaussian_kernel(const GaussianSpec& spec) {
  if (!spec.enabled()) return {1.0f};
  if (spec.kernel_size < 3 || spec.kernel_size % 2 == 0 || !(spec.sigma > 0.0)) {
    throw InvalidArgument("invalid GaussianSpec");
  }
  const int r = spec.kernel_size / 2;
  std::vector<double> w(static_cast<std::size_t>(spec.kernel_size));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * spec.sigma * spec.sigma));
    w[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  std::vector<float> taps(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) taps[i] = static_cast<float>(w[i] / total);
  return taps;
}

Field convolve_separable(const Field& field, std::span<const float> taps, BorderMode border,
                         const simd::KernelTable& k) {
  if (taps.empty() || taps.size() % 2 == 0) throw InvalidArgument("separable taps must have odd length");
  const int w = field.width();
  const int h = field.height();
  const int r = static_cast<int>(taps.size() / 2);
  const auto n = static_cast<std::size_t>(w);

  Field horiz(w, h);
  std::vector<float> padded(n + 2 * static_cast<std::size_t>(r));
  for (int y = 0; y < h; ++y) {
    auto src = field.row(y);
    for (int j = 0; j < w + 2 * r; ++j) padded[static_cast<std::size_t>(j)] = src[border_index(j - r, w, border)];
    float* dst = horiz.row(y).data();
    for (std::size_t t = 0; t < taps.size(); ++t) k.axpy(dst, padded.data() + t, taps[t], n);
  }

  Field out(w, h);
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y).data();
    for (int t = -r; t <= r; ++t) {
      const int sy = border_index(y + t, h, border);
      k.axpy(dst, horiz.row(sy).data(), taps[static_cast<std::size_t>(t + r)], n);
    }
  }
  return out;
}

Frame gaussian_smooth(const Frame& frame, const GaussianSpec& spec, BorderMode border, const simd::KernelTable& k) {
  if (!spec.enabled()) return frame;
  const auto taps = gaussian_kernel(spec);
  Frame out(convolve_separable(frame, taps, border, k));
  out.bit_depth_origin = frame.bit_depth_origin;
  out.t_index = frame.t_index;
  out.pixel_pitch_um = frame.pixel_pitch_um;
  k.clamp01(out.data(), out.size());
  return out;
}

Field laplacian5(const Raster<float>& frame, BorderMode border, const simd::KernelTable& k) {
  const int w = frame.width();
  const int h = frame.height();
  if (w < 3 || h < 3) throw InvalidArgument("laplacian5 needs at least a 3x3 frame");
  Field out(w, h);
  std::vector<float> mid(static_cast<std::size_t>(w) + 2);
  for (int y = 0; y < h; ++y) {
    auto row = frame.row(y);
    mid.front() = row[border_index(-1, w, border)];
    std::copy(row.begin(), row.end(), mid.begin() + 1);
    mid.back() = row[border_index(w, w, border)];
    const float* up = frame.row(border_index(y - 1, h, border)).data();
    const float* down = frame.row(border_index(y + 1, h, border)).data();
    k.laplace_row(up, mid.data() + 1, down, out.row(y).data(), static_cast<std::size_t>(w));
  }
  return out;
}

namespace {

Raster<float> warp_impl(const Raster<float>& src, double dx, double dy, const simd::KernelTable& k) {
  if (!std::isfinite(dx) || !std::isfinite(dy)) throw InvalidArgument("warp_translate: non-finite shift");
  const int w = src.width();
  const int h = src.height();
  // Output pixel x samples source column x + ix (+1) with weight (1-fx), fx.
  const double sx = std::floor(-dx);
  const double sy = std::floor(-dy);
  const double fx = -dx - sx;
  const double fy = -dy - sy;
  Raster<float> out(w, h);
  if (std::abs(sx) > w + 1 || std::abs(sy) > h + 1) return out;
  const int ix = static_cast<int>(sx);
  const int iy = static_cast<int>(sy);

  const auto n = static_cast<std::size_t>(w);
  std::vector<float> top(n + 1);
  std::vector<float> bottom(n + 1);
  auto fill = [&](std::vector<float>& buf, int source_row) {
    if (source_row < 0 || source_row >= h) {
      std::fill(buf.begin(), buf.end(), 0.0f);
      return;
    }
    auto row = src.row(source_row);
    for (int x = 0; x <= w; ++x) {
      const int c = x + ix;
      buf[static_cast<std::size_t>(x)] = (c >= 0 && c < w) ? row[static_cast<std::size_t>(c)] : 0.0f;
    }
  };
  const auto w00 = static_cast<float>((1.0 - fx) * (1.0 - fy));
  const auto w01 = static_cast<float>(fx * (1.0 - fy));
  const auto w10 = static_cast<float>((1.0 - fx) * fy);
  const auto w11 = static_cast<float>(fx * fy);
  for (int y = 0; y < h; ++y) {
    fill(top, y + iy);
    fill(bottom, y + iy + 1);
    k.blend4_row(top.data(), top.data() + 1, bottom.data(), bottom.data() + 1, w00, w01, w10, w11,
                 out.row(y).data(), n);
  }
  return out;
}

}  // namespace

Frame warp_translate(const Frame& frame, double dx, double dy, const simd::KernelTable& k) {
  Frame out(warp_impl(frame, dx, dy, k));
  out.bit_depth_origin = frame.bit_depth_origin;
  out.t_index = frame.t_index;
  out.pixel_pitch_um = frame.pixel_pitch_um;
  k.clamp01(out.data(), out.size());
  return out;
}

Field warp_translate(const Field& field, double dx, double dy, const simd::KernelTable& k) {
  return warp_impl(field, dx, dy, k);
}

Frame resize_half(const Frame& frame) {
  if (frame.width() % 2 != 0 || frame.height() % 2 != 0) {
    throw InvalidArgument("resize_half requires even dimensions");
  }
  Frame out(frame.width() / 2, frame.height() / 2);
  out.bit_depth_origin = frame.bit_depth_origin;
  out.t_index = frame.t_index;
  out.pixel_pitch_um = frame.pixel_pitch_um * 2.0;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double s = static_cast<double>(frame.at(2 * x, 2 * y)) + frame.at(2 * x + 1, 2 * y) +
                       frame.at(2 * x, 2 * y + 1) + frame.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = static_cast<float>(s * 0.25);
    }
  }
  return out;
}

BinaryMask threshold(const Raster<float>& frame, float t) {
  BinaryMask out(frame.width(), frame.height());
  auto src = frame.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= t ? 1 : 0;
  return out;
}

LabelMap label_components(const BinaryMask& binary, Connectivity connectivity) {
  const int w = binary.width();
  const int h = binary.height();
  LabelMap out{Raster<std::int32_t>(w, h, 0), 0};
  static constexpr std::array<std::array<int, 2>, 8> kOffsets{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};
  const int neighbours = connectivity == Connectivity::Four ? 4 : 8;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (binary.at(x, y) == 0 || out.labels.at(x, y) != 0) continue;
      const std::int32_t label = ++out.max_label;
      out.labels.at(x, y) = label;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int i = 0; i < neighbours; ++i) {
          const int nx = cx + kOffsets[static_cast<std::size_t>(i)][0];
          const int ny = cy + kOffsets[static_cast<std::size_t>(i)][1];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (binary.at(nx, ny) == 0 || out.labels.at(nx, ny) != 0) continue;
          out.labels.at(nx, ny) = label;
          stack.emplace_back(nx, ny);
        }
      }
    }
  }
  return out;
}

std::vector<RegionFeatures> region_features(const LabelMap& labels) {
  const auto count = static_cast<std::size_t>(labels.max_label);
  std::vector<std::int64_t> area(count, 0);
  std::vector<std::int64_t> sx(count, 0);
  std::vector<std::int64_t> sy(count, 0);
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const std::int32_t l = labels.labels.at(x, y);
      if (l <= 0) continue;
      const auto i = static_cast<std::size_t>(l - 1);
      ++area[i];
      sx[i] += x;
      sy[i] += y;
    }
  }
  std::vector<RegionFeatures> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (area[i] == 0) continue;
    out.push_back({static_cast<std::int32_t>(i + 1), area[i],
                   {static_cast<double>(sx[i]) / static_cast<double>(area[i]),
                    static_cast<double>(sy[i]) / static_cast<double>(area[i])}});
  }
  return out;
}

BinaryMask dilate_cross(const BinaryMask& mask, int iterations) {
  BinaryMask cur = mask;
  const int w = mask.width();
  const int h = mask.height();
  for (int it = 0; it < iterations; ++it) {
    BinaryMask next = cur;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (cur.at(x, y)) continue;
        if ((x > 0 && cur.at(x - 1, y)) || (x + 1 < w && cur.at(x + 1, y)) || (y > 0 && cur.at(x, y - 1)) ||
            (y + 1 < h && cur.at(x, y + 1))) {
          next.at(x, y) = 1;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

namespace {

// Squared 1-D distance transform of a sampled function (lower envelope of
// parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (!std::isfinite(f[static_cast<std::size_t>(q)])) continue;
    if (!std::isfinite(f[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])])) {
      v[static_cast<std::size_t>(k)] = q;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
           (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    const double fp = f[static_cast<std::size_t>(p)];
    d[static_cast<std::size_t>(q)] = std::isfinite(fp) ? (q - p) * static_cast<double>(q - p) + fp : kInf;
  }
}

}  // namespace

Raster<float> distance_transform(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Raster<double> sq(w, h, kInf);
  bool any_background = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) {
        sq.at(x, y) = 0.0;
        any_background = true;
      }
    }
  }
  Raster<float> out(w, h, 0.0f);
  if (!any_background) {
    std::fill(out.pixels().begin(), out.pixels().end(), static_cast<float>(w + h));
    return out;
  }
  const int m = std::max(w, h);
  std::vector<double> f(static_cast<std::size_t>(m));
  std::vector<double> d(static_cast<std::size_t>(m));
  std::vector<int> v(static_cast<std::size_t>(m));
  std::vector<double> z(static_cast<std::size_t>(m) + 1);
  for (int x = 0; x < w; ++x) {
    f.resize(static_cast<std::size_t>(h));
    d.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = sq.at(x, y);
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq.at(x, y) = d[static_cast<std::size_t>(y)];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = sq.at(x, y);
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) out.at(x, y) = static_cast<float>(std::sqrt(d[static_cast<std::size_t>(x)]));
  }
  return out;
}

float otsu_threshold(const Raster<float>& frame) {
  std::array<double, 256> hist{};
  for (float v : frame.pixels()) {
    const int b = std::clamp(static_cast<int>(v * 255.0f + 0.5f), 0, 255);
    hist[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(frame.size());
  double sum_all = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) sum_all += static_cast<double>(i) * hist[i];
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = 0.0;
  int best_bin = 255;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  // Foreground is v > threshold; bin t covers values rounding to t.
  return (static_cast<float>(best_bin) + 0.5f) / 255.0f;
}

Moments mean_variance(std::span<const float> values, const simd::KernelTable& k) {
  if (values.empty()) return {};
  double sum = 0.0;
  double sumsq = 0.0;
  k.sum_sumsq(values.data(), values.size(), &sum, &sumsq);
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  return {mean, std::max(0.0, sumsq / n - mean * mean)};
}

}  // namespace phagoq
