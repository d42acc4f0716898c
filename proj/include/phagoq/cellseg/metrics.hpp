#pragma once

#include "phagoq/imgcore/ops.hpp"

namespace phagoq::cellseg {

// Dilate 2 (cross), remove the original, dilate 4 more.
BinaryMask border_mask(const BinaryMask& gt);

// Class-balanced cross entropy with alpha = background / foreground count of
// gt; pred clipped to [1e-7, 1 - 1e-7].
double loss_global(const Raster<float>& pred, const BinaryMask& gt);

// |pred & gt_border| / |gt_border|.
double loss_border(const BinaryMask& pred, const BinaryMask& gt_border);

// omega * lg + (1 - omega) * lb, omega in [0, 0.5].
double total_loss(double lg, double lb, double omega = 0.4);

struct InstanceMetrics {
  bool defined = false;  // false when gt has no instances
  double mIoU = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double dice = 0.0;
  double seg = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

// Labels need not be dense; any nonzero value is an instance.
InstanceMetrics instance_metrics(const Raster<std::int32_t>& pred, const Raster<std::int32_t>& gt,
                                 double iou_threshold = 0.5);

}  // namespace phagoq::cellseg
