#include "phagoq/registration/sequence.hpp"

#include <cmath>
#include <optional>

#include "phagoq/util/csv.hpp"

namespace phagoq::registration {

std::string anchor_name(Anchor a) { return a == Anchor::FirstFrame ? "first_frame" : "previous_frame"; }

Anchor parse_anchor(const std::string& name) {
  if (name == "previous_frame") return Anchor::PreviousFrame;
  if (name == "first_frame") return Anchor::FirstFrame;
  throw InvalidArgument("unknown anchor '" + name + "' (expected previous_frame or first_frame)");
}

double RegistrationTrace::max_abs_shift() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max({m, std::abs(r.dx_cum), std::abs(r.dy_cum)});
  return m;
}

RegistrationTrace register_sequence(std::size_t count, const FrameSource& load, const RegistrationOptions& options,
                                    const FrameSink& sink) {
  options.schedule.validate();
  if (count == 0) throw InvalidArgument("register_sequence: empty sequence");
  RegistrationTrace trace;
  trace.anchor = options.anchor;
  trace.rows.reserve(count);

  Frame first = load(0);
  Pyramid anchor_pyr = prepare_pyramid(first, options.schedule);
  const int w = first.width();
  const int h = first.height();
  trace.rows.push_back(TraceRow{});
  if (sink) sink(0, first);
  first = Frame();

  for (std::size_t t = 1; t < count; ++t) {
    Frame frame = load(t);
    if (frame.width() != w || frame.height() != h) {
      throw InvalidArgument("register_sequence: frame " + std::to_string(t) + " has different dimensions");
    }
    Pyramid pyr = prepare_pyramid(frame, options.schedule);
    const TraceRow& prev = trace.rows.back();
    TraceRow row;
    row.t = static_cast<int>(t);

    std::optional<WarpEstimate> est;
    try {
      est = cecc(anchor_pyr, pyr, options.schedule).final;
    } catch (const DegenerateInput& e) {
      row.note = e.what();
    }
    // Kernels much wider than the frame can drift along flat ridges when
    // content changes between frames. Keep a direct full-resolution estimate
    // from the previous drift instead whenever it correlates better.
    if (options.schedule.stages.size() > 1) {
      const double ix = options.anchor == Anchor::PreviousFrame ? 0.0 : prev.dx_cum;
      const double iy = options.anchor == Anchor::PreviousFrame ? 0.0 : prev.dy_cum;
      try {
        WarpEstimate direct =
            ecc_translate(anchor_pyr.levels.back(), pyr.levels.back(), ix, iy, options.schedule.ecc);
        if (direct.converged && std::isfinite(direct.dx) && std::isfinite(direct.dy) &&
            (!est || !est->converged || direct.rho > est->rho + 1e-9)) {
          direct.note = "direct estimate kept over cascade";
          est = std::move(direct);
          row.note = est->note;
        }
      } catch (const DegenerateInput&) {
      }
    }
    const bool ok = est && est->converged && std::isfinite(est->dx) && std::isfinite(est->dy);
    if (est) {
      row.rho = est->rho;
      row.iterations = est->iterations;
      row.converged = est->converged;
      if (!est->note.empty() && !est->converged) row.note = est->note;
    } else {
      row.rho = std::nan("");
      row.converged = false;
    }

    if (!ok) {
      row.flagged = true;
      row.dx_cum = prev.dx_cum;
      row.dy_cum = prev.dy_cum;
    } else if (options.anchor == Anchor::PreviousFrame) {
      row.dx_pairwise = est->dx;
      row.dy_pairwise = est->dy;
      row.dx_cum = prev.dx_cum + est->dx;
      row.dy_cum = prev.dy_cum + est->dy;
    } else {
      row.dx_cum = est->dx;
      row.dy_cum = est->dy;
      row.dx_pairwise = est->dx - prev.dx_cum;
      row.dy_pairwise = est->dy - prev.dy_cum;
    }
    if (sink) sink(t, align_frame(frame, row));
    if (options.anchor == Anchor::PreviousFrame) anchor_pyr = std::move(pyr);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

RegisteredStack register_sequence(const std::vector<Frame>& frames, const RegistrationOptions& options) {
  RegisteredStack out;
  out.aligned.resize(frames.size());
  out.trace = register_sequence(
      frames.size(), [&](std::size_t t) { return frames[t]; }, options,
      [&](std::size_t t, const Frame& f) { out.aligned[t] = f; });
  return out;
}

Frame align_frame(const Frame& frame, const TraceRow& row) {
  if (row.flagged || (row.dx_cum == 0.0 && row.dy_cum == 0.0)) return frame;
  Frame out = warp_translate(frame, -row.dx_cum, -row.dy_cum);
  out.t_index = frame.t_index;
  out.bit_depth_origin = frame.bit_depth_origin;
  out.pixel_pitch_um = frame.pixel_pitch_um;
  return out;
}

Field align_field(const Field& field, const TraceRow& row) {
  if (row.flagged || (row.dx_cum == 0.0 && row.dy_cum == 0.0)) return field;
  return warp_translate(field, -row.dx_cum, -row.dy_cum);
}

void write_registration_csv(const std::filesystem::path& path, const RegistrationTrace& trace) {
  csv::Writer w(path, {"t", "dx_pairwise", "dy_pairwise", "dx_cum", "dy_cum", "rho", "iterations", "converged",
                       "flagged"});
  for (const auto& r : trace.rows) {
    w.row({csv::num(r.t), csv::num(r.dx_pairwise, 9), csv::num(r.dy_pairwise, 9), csv::num(r.dx_cum, 9),
           csv::num(r.dy_cum, 9), csv::num(r.rho, 9), csv::num(r.iterations), csv::flag(r.converged),
           csv::flag(r.flagged)});
  }
  w.close();
}

RegistrationTrace read_registration_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t"), cpx = tab.column("dx_pairwise"), cpy = tab.column("dy_pairwise"),
                    ccx = tab.column("dx_cum"), ccy = tab.column("dy_cum"), cr = tab.column("rho"),
                    ci = tab.column("iterations"), cc = tab.column("converged"), cf = tab.column("flagged");
  RegistrationTrace trace;
  for (const auto& f : tab.rows) {
    TraceRow r;
    r.t = static_cast<int>(csv::to_int(f[ct]));
    r.dx_pairwise = csv::to_double(f[cpx]);
    r.dy_pairwise = csv::to_double(f[cpy]);
    r.dx_cum = csv::to_double(f[ccx]);
    r.dy_cum = csv::to_double(f[ccy]);
    r.rho = csv::to_double(f[cr]);
    r.iterations = static_cast<int>(csv::to_int(f[ci]));
    r.converged = csv::to_flag(f[cc]);
    r.flagged = csv::to_flag(f[cf]);
    trace.rows.push_back(std::move(r));
  }
  return trace;
}

}  // namespace phagoq::registration
