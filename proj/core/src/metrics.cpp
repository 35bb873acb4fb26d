#include "segflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

void check_mask_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2 || !a.same_shape(b))
    throw ShapeError(std::string(what) + ": masks must be (H,W) with equal shapes");
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i] != 0.0 && a[i] != 1.0) || (b[i] != 0.0 && b[i] != 1.0))
      throw ShapeError(std::string(what) + ": masks must be binary");
}

// Mask pixels 4-adjacent to background; outside the canvas is background.
Tensor boundary_of(const Tensor& mask) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor b({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != 1.0) continue;
      const bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1 ||
                        mask.at(y - 1, x) == 0.0 || mask.at(y + 1, x) == 0.0 ||
                        mask.at(y, x - 1) == 0.0 || mask.at(y, x + 1) == 0.0;
      if (edge) b.at(y, x) = 1.0;
    }
  return b;
}

Tensor dilate_disc(const Tensor& mask, int radius) {
  const int h = mask.dim(0), w = mask.dim(1);
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dy, dx);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != 1.0) continue;
      for (const auto& [dy, dx] : offsets) {
        const int ny = y + dy, nx = x + dx;
        if (ny >= 0 && ny < h && nx >= 0 && nx < w) out.at(ny, nx) = 1.0;
      }
    }
  return out;
}

}  // namespace

double region_similarity(const Tensor& pred_mask, const Tensor& gt_mask) {
  check_mask_pair(pred_mask, gt_mask, "region_similarity");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool p = pred_mask[i] == 1.0, g = gt_mask[i] == 1.0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double contour_accuracy(const Tensor& pred_mask, const Tensor& gt_mask, int tolerance_px) {
  check_mask_pair(pred_mask, gt_mask, "contour_accuracy");
  const Tensor pb = boundary_of(pred_mask);
  const Tensor gb = boundary_of(gt_mask);
  std::size_t np = 0, ng = 0;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    np += pb[i] == 1.0 ? 1 : 0;
    ng += gb[i] == 1.0 ? 1 : 0;
  }
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const Tensor pb_tol = dilate_disc(pb, tolerance_px);
  const Tensor gb_tol = dilate_disc(gb, tolerance_px);
  std::size_t p_hit = 0, g_hit = 0;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    if (pb[i] == 1.0 && gb_tol[i] == 1.0) ++p_hit;
    if (gb[i] == 1.0 && pb_tol[i] == 1.0) ++g_hit;
  }
  const double precision = static_cast<double>(p_hit) / static_cast<double>(np);
  const double recall = static_cast<double>(g_hit) / static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::tuple<double, double, double> stat_triplet(const std::vector<double>& per_frame_values,
                                                double threshold) {
  if (per_frame_values.empty()) throw DataError("stat_triplet: empty series");
  const std::size_t n = per_frame_values.size();
  double sum = 0.0;
  std::size_t above = 0;
  for (double v : per_frame_values) {
    sum += v;
    above += v > threshold ? 1 : 0;
  }
  const std::size_t q = (n + 3) / 4;  // ceil(n/4)
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    first += per_frame_values[i];
    last += per_frame_values[n - q + i];
  }
  return {sum / static_cast<double>(n), static_cast<double>(above) / static_cast<double>(n),
          (first - last) / static_cast<double>(q)};
}

Tensor forward_warp_mask(const Tensor& mask, const Tensor& flow) {
  if (mask.rank() != 2 || flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != mask.dim(0) ||
      flow.dim(2) != mask.dim(1))
    throw ShapeError("forward_warp_mask: shape mismatch");
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != 1.0) continue;
      const int nx = static_cast<int>(std::lround(x + flow.at(0, y, x)));
      const int ny = static_cast<int>(std::lround(y + flow.at(1, y, x)));
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) out.at(ny, nx) = 1.0;
    }
  return out;
}

double temporal_stability_proxy(const std::vector<Tensor>& masks,
                                const std::vector<Tensor>& flows) {
  if (masks.size() < 2) throw DataError("temporal_stability_proxy: need at least 2 frames");
  if (flows.size() != masks.size() - 1)
    throw ShapeError("temporal_stability_proxy: need one flow per transition");
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < masks.size(); ++t) {
    const Tensor warped = forward_warp_mask(masks[t], flows[t]);
    total += 1.0 - region_similarity(warped, masks[t + 1]);
  }
  return total / static_cast<double>(masks.size() - 1);
}

double average_endpoint_error(const Tensor& flow_pred, const Tensor& flow_gt,
                              const Tensor* flow_valid) {
  if (flow_pred.rank() != 3 || flow_pred.dim(0) != 2 || !flow_pred.same_shape(flow_gt))
    throw ShapeError("average_endpoint_error: flow shape mismatch");
  const int h = flow_pred.dim(1), w = flow_pred.dim(2);
  if (flow_valid != nullptr &&
      (flow_valid->rank() != 2 || flow_valid->dim(0) != h || flow_valid->dim(1) != w))
    throw ShapeError("average_endpoint_error: validity mask shape mismatch");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double* pu = flow_pred.data();
  const double* pv = flow_pred.data() + n;
  const double* gu = flow_gt.data();
  const double* gv = flow_gt.data() + n;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (flow_valid != nullptr && (*flow_valid)[i] != 1.0) continue;
    const double du = gu[i] - pu[i];
    const double dv = gv[i] - pv[i];
    total += std::sqrt(du * du + dv * dv);
    ++count;
  }
  if (count == 0) throw DataError("average_endpoint_error: no valid pixels");
  return total / static_cast<double>(count);
}

SegFlowOutput flip_ensemble_infer(const SegFlowModel& model, const FramePair& pair) {
  const SegFlowOutput straight = model.forward(pair);

  FramePair mirrored;
  mirrored.frame_t = hflip(pair.frame_t);
  mirrored.frame_t1 = hflip(pair.frame_t1);
  const SegFlowOutput flipped = model.forward(mirrored);

  const int h = straight.seg_logits.dim(1), w = straight.seg_logits.dim(2);
  const Tensor p1 = foreground_probability(straight.seg_logits);
  const Tensor p2 = hflip(foreground_probability(flipped.seg_logits));

  SegFlowOutput out;
  out.seg_logits = Tensor({2, h, w});
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    const double fg = std::clamp(0.5 * (p1[i] + p2[i]), 1e-12, 1.0 - 1e-12);
    out.seg_logits[i] = std::log(1.0 - fg);
    out.seg_logits[n + i] = std::log(fg);
  }

  const Tensor flow2 = hflip(flipped.flow_pred);
  out.flow_pred = Tensor({2, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.flow_pred.at(0, y, x) = 0.5 * (straight.flow_pred.at(0, y, x) - flow2.at(0, y, x));
      out.flow_pred.at(1, y, x) = 0.5 * (straight.flow_pred.at(1, y, x) + flow2.at(1, y, x));
    }
  return out;
}

}  // namespace segflow
