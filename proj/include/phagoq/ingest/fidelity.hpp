#pragma once

#include <string>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::ingest {

struct FidelityReport {
  double mse = 0.0;
  double psnr_db = 0.0;   // meaningful only when !perfect
  bool perfect = false;   // mse == 0, PSNR unbounded
  double ssim = 1.0;

  // "inf" when perfect, otherwise %.6g.
  std::string psnr_text() const;
};

inline constexpr int kSsimWindow = 7;

// MSE and PSNR on the unit range; SSIM with a 7x7 uniform window, sample
// covariance and C1 = 0.01^2, C2 = 0.03^2, averaged over all windows that fit
// inside the image. Both sides must be at least 7x7.
FidelityReport assess_fidelity(const Raster<float>& a, const Raster<float>& b);

// Quantizes to 255 levels (round half away from zero) and maps back to [0,1].
Frame to_u8(const Frame& frame);

struct U8Conversion {
  Frame frame;
  FidelityReport fidelity;
};
U8Conversion to_u8_checked(const Frame& frame);

}  // namespace phagoq::ingest
