#pragma once

#include "segflow/autograd.hpp"
#include "segflow/tensor.hpp"

namespace segflow {

enum class Reduction { kSum, kMean };

struct LossValue {
  double value = 0.0;
  Reduction reduction = Reduction::kSum;
};

// Foreground fraction |fg| / (|fg| + |bg|) of a binary mask. Degenerate
// all-background masks give 0, all-foreground 1.
double fg_bg_weight(const Tensor& mask);

// Class-balanced softmax cross-entropy over 2-channel logits:
//   -(1 - w) * sum_{fg} log p(fg) - w * sum_{bg} log p(bg)
// with w the foreground fraction of mask_gt. Mean reduction divides the
// sum form by the pixel count.
LossValue weighted_seg_loss(const Tensor& seg_logits, const Tensor& mask_gt,
                            Reduction reduction = Reduction::kSum);

// Squared endpoint error sum_{valid} ((u - du)^2 + (v - dv)^2). This is the
// training form; the evaluation metric takes the square root per pixel
// (see metrics). Mean reduction divides by the valid-pixel count.
// flow_valid == nullptr treats every pixel as valid; zero valid pixels is
// an unsupervisable sample and throws DataError.
LossValue epe_loss(const Tensor& flow_pred, const Tensor& flow_gt,
                   const Tensor* flow_valid = nullptr,
                   Reduction reduction = Reduction::kMean);

// L = L_s + lambda * L_f. lambda must be positive: a zero lambda would
// silently stop training the flow branch.
LossValue combined_loss(const LossValue& seg, const LossValue& flow, double lambda_flow);

// Tape-building variants used by the training loop and gradient checks.
// They evaluate the identical kernels as the plain functions above.
ag::Var weighted_seg_loss_node(const ag::Var& seg_logits, const Tensor& mask_gt,
                               Reduction reduction = Reduction::kSum);
ag::Var epe_loss_node(const ag::Var& flow_pred, const Tensor& flow_gt,
                      const Tensor* flow_valid = nullptr,
                      Reduction reduction = Reduction::kMean);
ag::Var combined_loss_node(const ag::Var& seg, const ag::Var& flow, double lambda_flow);

}  // namespace segflow
