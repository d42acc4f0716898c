#include "phagoq/cellseg/cellseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "phagoq/util/csv.hpp"

namespace phagoq::cellseg {

void ProbabilityStack::validate() const {
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front())) throw InvalidArgument("probability maps differ in size");
    for (float v : f.pixels()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("probability outside [0,1]");
    }
  }
}

void TtcmConfig::validate() const {
  if (window_W < 1) throw InvalidArgument("window_W must be >= 1");
  if (!(seed_threshold > 0.0f && seed_threshold <= 1.0f)) throw InvalidArgument("seed_threshold must lie in (0,1]");
  if (!(mask_threshold > 0.0f && mask_threshold <= 1.0f)) throw InvalidArgument("mask_threshold must lie in (0,1]");
}

Coherence ttcm(std::span<const ProbabilityMap> window, const TtcmConfig& cfg) {
  cfg.validate();
  if (window.empty()) throw InvalidArgument("ttcm: empty window");
  const std::size_t used = std::min(window.size(), static_cast<std::size_t>(cfg.window_W));
  const ProbabilityMap& first = window.front();
  std::vector<int> counts(first.size(), 0);
  for (std::size_t k = 0; k < used; ++k) {
    if (!window[k].same_shape(first)) throw InvalidArgument("ttcm: maps differ in size");
    const auto px = window[k].pixels();
    for (std::size_t i = 0; i < px.size(); ++i) counts[i] += px[i] >= cfg.mask_threshold ? 1 : 0;
  }
  Coherence c;
  c.map = Raster<float>(first.width(), first.height());
  c.window_used = static_cast<int>(used);
  c.truncated = used < static_cast<std::size_t>(cfg.window_W);
  auto out = c.map.pixels();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(counts[i]) / static_cast<double>(used));
  }
  return c;
}

Coherence ttcm(const ProbabilityStack& stack, std::size_t t, const TtcmConfig& cfg) {
  if (t >= stack.frames.size()) throw InvalidArgument("ttcm: t outside the stack");
  return ttcm(std::span<const ProbabilityMap>(stack.frames).subspan(t), cfg);
}

SeedSet extract_seeds(const Raster<float>& coherence, const TtcmConfig& cfg) {
  cfg.validate();
  const LabelMap comps = label_components(threshold(coherence, cfg.seed_threshold), Connectivity::Eight);
  SeedSet set;
  set.width = coherence.width();
  set.height = coherence.height();
  set.seeds.resize(static_cast<std::size_t>(comps.max_label));
  for (std::size_t i = 0; i < set.seeds.size(); ++i) set.seeds[i].id = static_cast<std::int32_t>(i + 1);
  const auto lab = comps.labels.pixels();
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] > 0) set.seeds[static_cast<std::size_t>(lab[i] - 1)].pixels.push_back(i);
  }
  const auto w = static_cast<std::size_t>(set.width);
  for (auto& s : set.seeds) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i : s.pixels) {
      sx += static_cast<double>(i % w);
      sy += static_cast<double>(i / w);
    }
    s.centroid = {sx / static_cast<double>(s.pixels.size()), sy / static_cast<double>(s.pixels.size())};
  }
  return set;
}

std::int64_t watershed_cost(float p) {
  const double q = std::clamp(static_cast<double>(p), 0.0, 1.0);
  return std::llround(1000.0 * (1.0 - q)) + 10;
}

WatershedResult watershed_instances(const ProbabilityMap& probability, const SeedSet& seeds,
                                    const BinaryMask& foreground) {
  if (!probability.same_shape(foreground)) throw InvalidArgument("watershed: probability and mask differ in size");
  if (seeds.width != probability.width() || seeds.height != probability.height()) {
    throw InvalidArgument("watershed: seeds belong to a different frame size");
  }
  const int w = probability.width();
  const int h = probability.height();
  const std::size_t n = probability.size();
  WatershedResult out;
  out.labels.labels = Raster<std::int32_t>(w, h, 0);
  auto lab = out.labels.labels.pixels();
  const auto fg = foreground.pixels();
  const auto prob = probability.pixels();

  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> best(n, kInf);
  std::vector<std::int32_t> best_label(n, 0);
  std::vector<char> done(n, 0);
  using Entry = std::tuple<std::int64_t, std::int32_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  std::vector<const Seed*> ordered;
  for (const auto& s : seeds.seeds) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Seed* a, const Seed* b) { return a->id < b->id; });
  for (const Seed* s : ordered) {
    const auto label = static_cast<std::int32_t>(out.seed_ids.size() + 1);
    bool any = false;
    for (std::size_t i : s->pixels) {
      if (i >= n) throw InvalidArgument("watershed: seed pixel outside the frame");
      if (!fg[i] || best[i] == 0) continue;
      best[i] = 0;
      best_label[i] = label;
      heap.emplace(0, label, i);
      any = true;
    }
    if (any) {
      out.seed_ids.push_back(s->id);
    } else {
      ++out.dropped_seeds;
    }
  }

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, -1, 1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, 1, -1, -1};
  while (!heap.empty()) {
    const auto [cost, label, i] = heap.top();
    heap.pop();
    if (done[i] || cost != best[i] || label != best_label[i]) continue;
    done[i] = 1;
    lab[i] = label;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int k = 0; k < 8; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const std::size_t j = static_cast<std::size_t>(ny) * static_cast<std::size_t>(w) + static_cast<std::size_t>(nx);
      if (!fg[j] || done[j]) continue;
      const std::int64_t nc = cost + watershed_cost(prob[j]);
      if (std::tie(nc, label) < std::tie(best[j], best_label[j])) {
        best[j] = nc;
        best_label[j] = label;
        heap.emplace(nc, label, j);
      }
    }
  }
  out.labels.max_label = static_cast<std::int32_t>(out.seed_ids.size());
  return out;
}

ProbabilityMap threshold_fallback(const Frame& frame) {
  ProbabilityMap out(frame.width(), frame.height(), 0.0f);
  const auto [lo, hi] = std::minmax_element(frame.pixels().begin(), frame.pixels().end());
  if (*hi - *lo < 1e-6f) return out;
  const Frame smooth = gaussian_smooth(frame, GaussianSpec::from_kernel_size(5));
  const BinaryMask mask = threshold(smooth, otsu_threshold(smooth));
  const Raster<float> dist = distance_transform(mask);
  const LabelMap comps = label_components(mask, Connectivity::Eight);
  std::vector<float> peak(static_cast<std::size_t>(comps.max_label) + 1, 0.0f);
  const auto lab = comps.labels.pixels();
  const auto d = dist.pixels();
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] > 0) peak[static_cast<std::size_t>(lab[i])] = std::max(peak[static_cast<std::size_t>(lab[i])], d[i]);
  }
  auto o = out.pixels();
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] > 0) o[i] = 0.5f + 0.5f * d[i] / peak[static_cast<std::size_t>(lab[i])];
  }
  return out;
}

double coherence_score(const LabelMap& labels, std::int32_t label, const Raster<float>& coherence) {
  if (!labels.labels.same_shape(coherence)) throw InvalidArgument("coherence_score: size mismatch");
  const auto lab = labels.labels.pixels();
  const auto c = coherence.pixels();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] == label) {
      sum += c[i];
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("coherence_score: empty instance " + std::to_string(label));
  return sum / static_cast<double>(count);
}

InstanceMask segment_cells(std::span<const ProbabilityMap> window, const SegmentOptions& options) {
  const Coherence coh = ttcm(window, options.ttcm);
  const ProbabilityMap& prob = window.front();
  const BinaryMask fg = threshold(prob, options.ttcm.mask_threshold);
  WatershedResult ws = watershed_instances(prob, extract_seeds(coh.map, options.ttcm), fg);

  InstanceMask out;
  out.labels = std::move(ws.labels);
  auto lab = out.labels.labels.pixels();

  // Foreground components no seed reached.
  BinaryMask rest(prob.width(), prob.height(), 0);
  auto r = rest.pixels();
  const auto f = fg.pixels();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] && lab[i] == 0 ? 1 : 0;
  const LabelMap extra = label_components(rest, Connectivity::Eight);
  if (extra.max_label > 0) {
    std::vector<std::int64_t> area(static_cast<std::size_t>(extra.max_label) + 1, 0);
    for (auto l : extra.labels.pixels()) ++area[static_cast<std::size_t>(l)];
    std::vector<std::int32_t> remap(area.size(), 0);
    for (std::size_t l = 1; l < area.size(); ++l) {
      if (area[l] >= options.min_unseeded_area_px) remap[l] = ++out.labels.max_label;
    }
    const auto e = extra.labels.pixels();
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (e[i] > 0 && remap[static_cast<std::size_t>(e[i])] > 0) lab[i] = remap[static_cast<std::size_t>(e[i])];
    }
  }

  const int w = prob.width();
  const int h = prob.height();
  std::vector<char> touches(static_cast<std::size_t>(out.labels.max_label) + 1, 0);
  for (int x = 0; x < w; ++x) {
    touches[static_cast<std::size_t>(out.labels.labels.at(x, 0))] = 1;
    touches[static_cast<std::size_t>(out.labels.labels.at(x, h - 1))] = 1;
  }
  for (int y = 0; y < h; ++y) {
    touches[static_cast<std::size_t>(out.labels.labels.at(0, y))] = 1;
    touches[static_cast<std::size_t>(out.labels.labels.at(w - 1, y))] = 1;
  }
  std::vector<double> csum(touches.size(), 0.0);
  const auto c = coh.map.pixels();
  for (std::size_t i = 0; i < lab.size(); ++i) csum[static_cast<std::size_t>(lab[i])] += c[i];
  for (const auto& feat : region_features(out.labels)) {
    Instance inst;
    inst.features = feat;
    inst.coherence = csum[static_cast<std::size_t>(feat.label)] / static_cast<double>(feat.area_px);
    if (coh.truncated) inst.flags |= kFlagTruncatedWindow;
    if (touches[static_cast<std::size_t>(feat.label)]) inst.flags |= kFlagBorderTouch;
    out.instances.push_back(inst);
  }
  return out;
}

void write_cells_csv(const std::filesystem::path& path, std::span<const CellRow> rows) {
  csv::Writer w(path, {"t", "instance_id", "area_px", "cx", "cy", "coherence", "boundary_flags"});
  for (const auto& r : rows) {
    w.row({csv::num(r.t), csv::num(static_cast<long long>(r.instance_id)), csv::num(static_cast<long long>(r.area_px)),
           csv::num(r.centroid.x, 9), csv::num(r.centroid.y, 9), csv::num(r.coherence),
           csv::num(static_cast<int>(r.flags))});
  }
  w.close();
}

std::vector<CellRow> read_cells_csv(const std::filesystem::path& path) {
  const csv::Table tab = csv::read(path);
  const std::size_t ct = tab.column("t"), ci = tab.column("instance_id"), ca = tab.column("area_px"),
                    cx = tab.column("cx"), cy = tab.column("cy"), cc = tab.column("coherence"),
                    cf = tab.column("boundary_flags");
  std::vector<CellRow> out;
  for (const auto& row : tab.rows) {
    CellRow r;
    r.t = static_cast<int>(csv::to_int(row[ct]));
    r.instance_id = static_cast<std::int32_t>(csv::to_int(row[ci]));
    r.area_px = csv::to_int(row[ca]);
    r.centroid = {csv::to_double(row[cx]), csv::to_double(row[cy])};
    r.coherence = csv::to_double(row[cc]);
    r.flags = static_cast<std::uint8_t>(csv::to_int(row[cf]));
    out.push_back(r);
  }
  return out;
}

}  // namespace phagoq::cellseg
