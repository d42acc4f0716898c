#include "phagoq/qualitycheck/quality.hpp"

#include <cmath>
#include <fstream>

#include "phagoq/util/csv.hpp"

namespace phagoq::quality {

void BlurConfig::validate() const {
  if (!(epsilon_blur >= 0.0 && epsilon_blur <= 1.0)) throw InvalidArgument("epsilon_blur must lie in [0,1]");
  if (lookahead_B < 1) throw InvalidArgument("lookahead_B must be >= 1");
  if (!(max_blurry_fraction >= 0.0 && max_blurry_fraction <= 1.0)) {
    throw InvalidArgument("max_blurry_fraction must lie in [0,1]");
  }
}

double laplacian_variance(const Raster<float>& frame, BorderMode border, const simd::KernelTable& k) {
  if (frame.width() < 3 || frame.height() < 3) throw InvalidArgument("laplacian_variance needs at least 3x3");
  const Field lap = laplacian5(frame, border, k);
  return mean_variance(lap.pixels(), k).variance;
}

BlurFragment detect_blur(std::span<const double> v, const BlurConfig& cfg) {
  cfg.validate();
  if (v.size() < 2) throw InvalidArgument("detect_blur needs at least 2 frames");
  const std::size_t n = v.size();
  const auto B = static_cast<std::size_t>(cfg.lookahead_B);
  const double eps = cfg.epsilon_blur;

  BlurFragment out;
  out.frames.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.frames[t].t = static_cast<int>(t);
    out.frames[t].lap_var = v[t];
  }

  double baseline = v[0];
  std::size_t t = 1;
  while (t < n) {
    if (!(baseline > 0.0) || !std::isfinite(baseline)) {
      throw DegenerateInput("detect_blur: baseline Laplacian variance is zero at t=" + std::to_string(t - 1));
    }
    FrameQuality& f = out.frames[t];
    f.rel_change = std::abs(1.0 - v[t] / baseline);
    if (f.rel_change <= eps) {
      baseline = v[t];
      ++t;
      continue;
    }
    if (v[t] > baseline) {
      f.reason = "content change";
      baseline = v[t];
      ++t;
      continue;
    }

    const double floor = baseline * (1.0 - eps);
    std::size_t r = t + 1;
    const std::size_t end = std::min(n, t + 1 + B);
    while (r < end && v[r] < floor) ++r;
    if (r < end) {
      for (std::size_t i = t; i < r; ++i) {
        out.frames[i].rejected = true;
        out.frames[i].reason = "blur";
        out.frames[i].rel_change = std::abs(1.0 - v[i] / baseline);
      }
      t = r;
    } else if (t + B < n) {
      f.reason = "baseline reset";
      ++out.baseline_resets;
      baseline = v[t];
      ++t;
    } else {
      for (std::size_t i = t; i < n; ++i) {
        out.frames[i].rejected = true;
        out.frames[i].reason = "blur";
        out.frames[i].rel_change = std::abs(1.0 - v[i] / baseline);
      }
      t = n;
    }
  }
  return out;
}

BlurFragment detect_blur(std::span<const Frame> frames, const BlurConfig& cfg) {
  std::vector<double> v;
  v.reserve(frames.size());
  for (const Frame& f : frames) v.push_back(laplacian_variance(f));
  return detect_blur(v, cfg);
}

std::vector<int> QualityReport::kept_indices() const {
  std::vector<int> kept;
  for (const auto& f : frames) {
    if (!f.rejected) kept.push_back(f.t);
  }
  return kept;
}

QualityReport quality_gate(const registration::RegistrationTrace& trace, const BlurFragment& blur,
                           const BlurConfig& cfg, double shift_bound) {
  cfg.validate();
  if (!trace.rows.empty() && trace.rows.size() != blur.frames.size()) {
    throw InvalidArgument("quality_gate: registration trace and blur scan cover different frame counts");
  }
  QualityReport q;
  q.frames = blur.frames;
  q.shift_bound = shift_bound;
  q.max_blurry_fraction = cfg.max_blurry_fraction;
  q.baseline_resets = blur.baseline_resets;
  q.max_abs_shift = trace.max_abs_shift();
  for (const auto& r : trace.rows) q.registration_flagged += r.flagged ? 1 : 0;
  for (const auto& f : q.frames) q.rejected_count += f.rejected ? 1 : 0;
  q.blurry_fraction = q.frames.empty() ? 0.0 : static_cast<double>(q.rejected_count) / q.frames.size();
  if (q.blurry_fraction > cfg.max_blurry_fraction) q.fail_reasons.push_back("blurry_fraction");
  if (q.max_abs_shift > shift_bound) q.fail_reasons.push_back("shift");
  q.pass = q.fail_reasons.empty();
  return q;
}

void write_quality_csv(const std::filesystem::path& path, const QualityReport& report) {
  csv::Writer w(path, {"t", "lap_var", "rel_change", "rejected", "reason"});
  for (const auto& f : report.frames) {
    w.row({csv::num(f.t), csv::num(f.lap_var, 9), csv::num(f.rel_change, 9), csv::flag(f.rejected), f.reason});
  }
  w.close();
}

std::vector<FrameQuality> read_quality_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t"), cv = tab.column("lap_var"), cr = tab.column("rel_change"),
                    cj = tab.column("rejected"), cn = tab.column("reason");
  std::vector<FrameQuality> out;
  for (const auto& row : tab.rows) {
    FrameQuality f;
    f.t = static_cast<int>(csv::to_int(row[ct]));
    f.lap_var = csv::to_double(row[cv]);
    f.rel_change = csv::to_double(row[cr]);
    f.rejected = csv::to_flag(row[cj]);
    f.reason = row[cn];
    out.push_back(std::move(f));
  }
  return out;
}

void write_scene_quality(const std::filesystem::path& path, const QualityReport& q) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  std::string reasons;
  for (const auto& r : q.fail_reasons) reasons += (reasons.empty() ? "" : ";") + r;
  std::string rejected;
  for (const auto& f : q.frames) {
    if (f.rejected) rejected += (rejected.empty() ? "" : " ") + std::to_string(f.t);
  }
  out << "pass: " << (q.pass ? "yes" : "no") << '\n'
      << "fail_reasons: " << (reasons.empty() ? "none" : reasons) << '\n'
      << "frames: " << q.frames.size() << '\n'
      << "rejected_frames: " << q.rejected_count << '\n'
      << "rejected_indices: " << (rejected.empty() ? "none" : rejected) << '\n'
      << "blurry_fraction: " << csv::num(q.blurry_fraction) << '\n'
      << "max_blurry_fraction: " << csv::num(q.max_blurry_fraction) << '\n'
      << "max_abs_shift_px: " << csv::num(q.max_abs_shift) << '\n'
      << "shift_bound_px: " << csv::num(q.shift_bound) << '\n'
      << "baseline_resets: " << q.baseline_resets << '\n'
      << "registration_flagged: " << q.registration_flagged << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace phagoq::quality
