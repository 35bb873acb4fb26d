#pragma once

#include <tuple>
#include <vector>

#include "segflow/model.hpp"
#include "segflow/tensor.hpp"
#include "segflow/types.hpp"

namespace segflow {

// Intersection-over-union of two binary masks; 1 when both are empty
// (they agree there is no object).
double region_similarity(const Tensor& pred_mask, const Tensor& gt_mask);

// Boundary F-measure: precision is the fraction of predicted boundary
// pixels within tolerance_px (Euclidean, via dilation) of the ground-truth
// boundary, recall symmetric. Boundary pixels are mask pixels 4-adjacent
// to background; the canvas border counts as background. Both boundaries
// empty -> 1, exactly one empty -> 0.
double contour_accuracy(const Tensor& pred_mask, const Tensor& gt_mask, int tolerance_px = 2);

// (mean, recall, decay) of a per-frame quality series: recall is the
// fraction of frames above threshold; decay is the mean of the first
// temporal quartile minus the mean of the last (quartile size ceil(n/4)
// by frame index).
std::tuple<double, double, double> stat_triplet(const std::vector<double>& per_frame_values,
                                                double threshold = 0.5);

// Temporal stability proxy: mean over transitions of
// 1 - IoU(warp(mask_t, flow_t), mask_{t+1}), the warp pushing mask_t
// forward by the flow with nearest-neighbor rounding. Lower is smoother.
// Requires >= 2 masks and one flow per transition.
double temporal_stability_proxy(const std::vector<Tensor>& masks,
                                const std::vector<Tensor>& flows);

// Mean over valid pixels of sqrt((u-du)^2 + (v-dv)^2) — the rooted
// evaluation form, unlike the squared training loss.
double average_endpoint_error(const Tensor& flow_pred, const Tensor& flow_gt,
                              const Tensor* flow_valid = nullptr);

// Forward-warps a binary mask by a flow field (nearest-neighbor push).
Tensor forward_warp_mask(const Tensor& mask, const Tensor& flow);

// Inference on the pair and its horizontal mirror, un-mirrored and
// averaged. Segmentation is averaged in probability space (the returned
// scores are log of the averaged probabilities, so softmax recovers them
// exactly); the mirrored flow is un-flipped with its u component negated.
// Never mutates the model.
SegFlowOutput flip_ensemble_infer(const SegFlowModel& model, const FramePair& pair);

}  // namespace segflow
