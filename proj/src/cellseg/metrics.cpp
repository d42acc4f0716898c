#include "phagoq/cellseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <unordered_map>

namespace phagoq::cellseg {

BinaryMask border_mask(const BinaryMask& gt) {
  BinaryMask ring = dilate_cross(gt, 2);
  auto r = ring.pixels();
  const auto g = gt.pixels();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = r[i] && !g[i] ? 1 : 0;
  return dilate_cross(ring, 4);
}

double loss_global(const Raster<float>& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) throw InvalidArgument("loss_global: size mismatch");
  std::size_t fg = 0;
  for (auto v : gt.pixels()) fg += v ? 1 : 0;
  const std::size_t bg = gt.size() - fg;
  if (fg == 0) throw DegenerateInput("loss_global: ground truth has no foreground pixels");
  if (bg == 0) throw DegenerateInput("loss_global: ground truth has no background pixels");
  const double alpha = static_cast<double>(bg) / static_cast<double>(fg);
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  const auto p = pred.pixels();
  const auto g = gt.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), kLo, kHi);
    sum += g[i] ? std::log(q) : alpha * std::log(1.0 - q);
  }
  return -sum / static_cast<double>(p.size());
}

double loss_border(const BinaryMask& pred, const BinaryMask& gt_border) {
  if (!pred.same_shape(gt_border)) throw InvalidArgument("loss_border: size mismatch");
  std::size_t border = 0, hit = 0;
  const auto p = pred.pixels();
  const auto b = gt_border.pixels();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b[i]) continue;
    ++border;
    hit += p[i] ? 1 : 0;
  }
  if (border == 0) throw DegenerateInput("loss_border: empty ground-truth border");
  return static_cast<double>(hit) / static_cast<double>(border);
}

double total_loss(double lg, double lb, double omega) {
  if (!(omega >= 0.0 && omega <= 0.5)) throw InvalidArgument("total_loss: omega must lie in [0, 0.5]");
  return omega * lg + (1.0 - omega) * lb;
}

InstanceMetrics instance_metrics(const Raster<std::int32_t>& pred, const Raster<std::int32_t>& gt,
                                 double iou_threshold) {
  if (!pred.same_shape(gt)) throw InvalidArgument("instance_metrics: size mismatch");
  std::map<std::int32_t, std::int64_t> gt_area, pred_area;
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> inter;
  std::int64_t both = 0;
  const auto p = pred.pixels();
  const auto g = gt.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]) ++gt_area[g[i]];
    if (p[i]) ++pred_area[p[i]];
    if (g[i] && p[i]) {
      ++inter[{g[i], p[i]}];
      ++both;
    }
  }
  InstanceMetrics m;
  if (gt_area.empty()) return m;
  m.defined = true;

  struct Pair {
    double iou;
    std::int32_t g, p;
    std::int64_t inter;
  };
  std::vector<Pair> pairs;
  std::unordered_map<std::int32_t, double> best_iou;
  for (const auto& [key, n] : inter) {
    const double u = static_cast<double>(gt_area[key.first] + pred_area[key.second] - n);
    const double iou = static_cast<double>(n) / u;
    pairs.push_back({iou, key.first, key.second, n});
    best_iou[key.first] = std::max(best_iou[key.first], iou);
  }

  double miou = 0.0;
  for (const auto& [label, a] : gt_area) miou += best_iou.count(label) ? best_iou[label] : 0.0;
  const auto n_gt = static_cast<double>(gt_area.size());
  m.mIoU = miou / n_gt;

  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.g, a.p) < std::tie(a.iou, b.g, b.p);
  });
  std::unordered_map<std::int32_t, char> used_g, used_p;
  for (const auto& pr : pairs) {
    if (pr.iou < iou_threshold) break;
    if (used_g[pr.g] || used_p[pr.p]) continue;
    used_g[pr.g] = used_p[pr.p] = 1;
    ++m.tp;
  }
  m.fp = static_cast<int>(pred_area.size()) - m.tp;
  m.fn = static_cast<int>(gt_area.size()) - m.tp;
  const double tp = m.tp, fp = m.fp, fn = m.fn;
  m.f1 = 2 * tp / (2 * tp + fp + fn);
  m.accuracy = tp / (tp + fp + fn);
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp / (tp + fn);

  std::int64_t sum_g = 0, sum_p = 0;
  for (const auto& [l, a] : gt_area) sum_g += a;
  for (const auto& [l, a] : pred_area) sum_p += a;
  m.dice = 2.0 * static_cast<double>(both) / static_cast<double>(sum_g + sum_p);

  double seg = 0.0;
  for (const auto& pr : pairs) {
    if (2 * pr.inter > gt_area[pr.g]) seg += pr.iou;
  }
  m.seg = seg / n_gt;
  return m;
}

}  // namespace phagoq::cellseg
