#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "phagoq/registration/ecc.hpp"

namespace phagoq::registration {

// previous_frame: frame t is registered against frame t-1 and the pairwise
// shifts are summed. first_frame: every frame is registered against frame 0.
enum class Anchor { PreviousFrame, FirstFrame };

std::string anchor_name(Anchor a);
Anchor parse_anchor(const std::string& name);

inline constexpr double kDefaultShiftTolerancePx = 50.0;

struct RegistrationOptions {
  CascadeSchedule schedule;
  Anchor anchor = Anchor::PreviousFrame;
};

struct TraceRow {
  int t = 0;
  double dx_pairwise = 0.0;
  double dy_pairwise = 0.0;
  double dx_cum = 0.0;
  double dy_cum = 0.0;
  double rho = 1.0;
  int iterations = 0;
  bool converged = true;
  bool flagged = false;  // estimation failed; frame passed through unwarped
  std::string note;
};

struct RegistrationTrace {
  Anchor anchor = Anchor::PreviousFrame;
  std::vector<TraceRow> rows;

  // Largest |dx_cum| or |dy_cum| over all frames.
  double max_abs_shift() const;
};

using FrameSource = std::function<Frame(std::size_t t)>;
using FrameSink = std::function<void(std::size_t t, const Frame& aligned)>;

// Streams frames 0..count-1 from `load`, estimates their drift and hands each
// aligned frame to `sink` (if set). Holds at most two frames' pyramids at a
// time. Each pair also gets a direct full-resolution ECC started at the
// previous drift; it replaces the cascade estimate when its rho is higher.
RegistrationTrace register_sequence(std::size_t count, const FrameSource& load, const RegistrationOptions& options,
                                    const FrameSink& sink = {});

struct RegisteredStack {
  RegistrationTrace trace;
  std::vector<Frame> aligned;
};
RegisteredStack register_sequence(const std::vector<Frame>& frames, const RegistrationOptions& options = {});

// Undo the cumulative drift of one frame: warp by (-dx_cum, -dy_cum).
// Flagged rows return the frame unchanged.
Frame align_frame(const Frame& frame, const TraceRow& row);
Field align_field(const Field& field, const TraceRow& row);

// t, dx_pairwise, dy_pairwise, dx_cum, dy_cum, rho, iterations, converged, flagged
void write_registration_csv(const std::filesystem::path& path, const RegistrationTrace& trace);
RegistrationTrace read_registration_csv(const std::filesystem::path& path);

}  // namespace phagoq::registration
