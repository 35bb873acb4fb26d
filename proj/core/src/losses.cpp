#include "segflow/losses.hpp"

#include <cmath>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

void check_binary(const Tensor& mask, const char* what) {
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] != 0.0 && mask[i] != 1.0)
      throw ShapeError(std::string(what) + ": mask values must be exactly 0 or 1");
}

// Shared kernel: loss value and, when dlogits != nullptr, d(loss)/d(logits).
double seg_loss_kernel(const Tensor& logits, const Tensor& mask, Reduction red,
                       Tensor* dlogits) {
  if (logits.rank() != 3 || logits.dim(0) != 2)
    throw ShapeError("weighted_seg_loss: logits must be (2,H,W)");
  if (mask.rank() != 2 || mask.dim(0) != logits.dim(1) || mask.dim(1) != logits.dim(2))
    throw ShapeError("weighted_seg_loss: mask shape must match logits");
  if (!logits.all_finite()) throw ShapeError("weighted_seg_loss: non-finite logits");
  check_binary(mask, "weighted_seg_loss");

  const int h = mask.dim(0), w_px = mask.dim(1);
  const std::size_t n = mask.size();
  const double w = fg_bg_weight(mask);
  const double scale = red == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;

  if (dlogits != nullptr) *dlogits = Tensor::zeros_like(logits);
  const double* z0 = logits.data();
  const double* z1 = logits.data() + n;
  double loss = 0.0;
  for (int i = 0; i < h * w_px; ++i) {
    const double m = std::max(z0[i], z1[i]);
    const double lse = m + std::log(std::exp(z0[i] - m) + std::exp(z1[i] - m));
    const double logp0 = z0[i] - lse;
    const double logp1 = z1[i] - lse;
    const bool fg = mask[static_cast<std::size_t>(i)] == 1.0;
    const double cw = fg ? (1.0 - w) : w;
    loss -= cw * (fg ? logp1 : logp0);
    if (dlogits != nullptr) {
      const double p0 = std::exp(logp0);
      const double p1 = std::exp(logp1);
      // d(-cw * log p_y)/dz_c = -cw * (1[c == y] - p_c)
      const double y1 = fg ? 1.0 : 0.0;
      (*dlogits)[static_cast<std::size_t>(i)] = -cw * ((1.0 - y1) - p0) * scale;
      (*dlogits)[n + static_cast<std::size_t>(i)] = -cw * (y1 - p1) * scale;
    }
  }
  return loss * scale;
}

double epe_kernel(const Tensor& pred, const Tensor& gt, const Tensor* valid, Reduction red,
                  Tensor* dpred) {
  if (pred.rank() != 3 || pred.dim(0) != 2) throw ShapeError("epe_loss: flow must be (2,H,W)");
  if (!pred.same_shape(gt)) throw ShapeError("epe_loss: prediction/ground-truth shape mismatch");
  const int h = pred.dim(1), w = pred.dim(2);
  if (valid != nullptr) {
    if (valid->rank() != 2 || valid->dim(0) != h || valid->dim(1) != w)
      throw ShapeError("epe_loss: validity mask shape mismatch");
    check_binary(*valid, "epe_loss");
  }
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::size_t n_valid = n;
  if (valid != nullptr) {
    n_valid = 0;
    for (std::size_t i = 0; i < n; ++i) n_valid += (*valid)[i] == 1.0 ? 1 : 0;
  }
  if (n_valid == 0) throw DataError("epe_loss: no valid pixels, sample is unsupervisable");
  const double scale = red == Reduction::kMean ? 1.0 / static_cast<double>(n_valid) : 1.0;

  if (dpred != nullptr) *dpred = Tensor::zeros_like(pred);
  const double* pu = pred.data();
  const double* pv = pred.data() + n;
  const double* gu = gt.data();
  const double* gv = gt.data() + n;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid != nullptr && (*valid)[i] != 1.0) continue;
    const double ru = gu[i] - pu[i];
    const double rv = gv[i] - pv[i];
    loss += ru * ru + rv * rv;
    if (dpred != nullptr) {
      (*dpred)[i] = -2.0 * ru * scale;
      (*dpred)[n + i] = -2.0 * rv * scale;
    }
  }
  return loss * scale;
}

}  // namespace

double fg_bg_weight(const Tensor& mask) {
  if (mask.rank() != 2) throw ShapeError("fg_bg_weight: mask must be (H,W)");
  check_binary(mask, "fg_bg_weight");
  std::size_t fg = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) fg += mask[i] == 1.0 ? 1 : 0;
  return static_cast<double>(fg) / static_cast<double>(mask.size());
}

LossValue weighted_seg_loss(const Tensor& seg_logits, const Tensor& mask_gt, Reduction reduction) {
  return {seg_loss_kernel(seg_logits, mask_gt, reduction, nullptr), reduction};
}

LossValue epe_loss(const Tensor& flow_pred, const Tensor& flow_gt, const Tensor* flow_valid,
                   Reduction reduction) {
  return {epe_kernel(flow_pred, flow_gt, flow_valid, reduction, nullptr), reduction};
}

LossValue combined_loss(const LossValue& seg, const LossValue& flow, double lambda_flow) {
  if (!(lambda_flow > 0.0))
    throw ConfigError("combined_loss: lambda_flow must be positive");
  if (!std::isfinite(seg.value) || !std::isfinite(flow.value))
    throw ShapeError("combined_loss: non-finite loss term");
  return {seg.value + lambda_flow * flow.value, seg.reduction};
}

ag::Var weighted_seg_loss_node(const ag::Var& seg_logits, const Tensor& mask_gt,
                               Reduction reduction) {
  auto dlogits = std::make_shared<Tensor>();
  Tensor value({1});
  value[0] = seg_loss_kernel(seg_logits->value, mask_gt, reduction, dlogits.get());
  auto node = std::make_shared<ag::Node>();
  node->value = std::move(value);
  node->inputs = {seg_logits};
  node->needs_grad = seg_logits->needs_grad;
  if (node->needs_grad) {
    node->backfn = [dlogits](ag::Node& self) {
      auto& in = self.inputs[0];
      in->ensure_grad();
      const double g = self.grad[0];
      for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += g * (*dlogits)[i];
    };
  }
  return node;
}

ag::Var epe_loss_node(const ag::Var& flow_pred, const Tensor& flow_gt, const Tensor* flow_valid,
                      Reduction reduction) {
  auto dpred = std::make_shared<Tensor>();
  Tensor value({1});
  value[0] = epe_kernel(flow_pred->value, flow_gt, flow_valid, reduction, dpred.get());
  auto node = std::make_shared<ag::Node>();
  node->value = std::move(value);
  node->inputs = {flow_pred};
  node->needs_grad = flow_pred->needs_grad;
  if (node->needs_grad) {
    node->backfn = [dpred](ag::Node& self) {
      auto& in = self.inputs[0];
      in->ensure_grad();
      const double g = self.grad[0];
      for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += g * (*dpred)[i];
    };
  }
  return node;
}

ag::Var combined_loss_node(const ag::Var& seg, const ag::Var& flow, double lambda_flow) {
  if (!(lambda_flow > 0.0))
    throw ConfigError("combined_loss: lambda_flow must be positive");
  return ag::add_scaled(seg, flow, lambda_flow);
}

}  // namespace segflow
