#pragma once

#include <optional>
#include <vector>

#include "segflow/tensor.hpp"

namespace segflow {

// Two consecutive RGB frames plus whichever ground truths the source
// dataset carries. Frames are (3,H,W) in [0,1]; the mask is (H,W) binary;
// flow is (2,H,W) in pixels, frame_t -> frame_t1, with an optional binary
// validity mask.
struct FramePair {
  Tensor frame_t;
  Tensor frame_t1;
  std::optional<Tensor> mask_gt;
  std::optional<Tensor> flow_gt;
  std::optional<Tensor> flow_valid;

  int height() const { return frame_t.dim(1); }
  int width() const { return frame_t.dim(2); }

  // Throws ShapeError unless every present array matches (h, w) and the
  // binary fields are exactly {0,1}-valued.
  void validate(int h, int w) const;
};

struct PyramidLevel {
  int scale = 1;  // denominator: features are input_size / scale
  Tensor features;
};

// Multi-scale feature maps ordered by strictly increasing scale
// denominator.
struct FeaturePyramid {
  std::vector<PyramidLevel> levels;

  const PyramidLevel* find(int scale) const;
  // Throws ShapeError if denominators are not strictly increasing or a
  // level's spatial shape is not exactly input_size / scale.
  void validate(int input_h, int input_w) const;
};

// One forward pass: full-resolution 2-channel segmentation scores
// (background, foreground; pre-softmax) and a 2-channel flow field.
struct SegFlowOutput {
  Tensor seg_logits;
  Tensor flow_pred;
};

// Softmax over the 2 channels of seg_logits; returns the foreground
// probability map (H,W).
Tensor foreground_probability(const Tensor& seg_logits);

// Hard mask: foreground where p(fg) > 0.5.
Tensor logits_to_mask(const Tensor& seg_logits);

Tensor hflip(const Tensor& t);  // flips the last (width) axis of (H,W) or (C,H,W)

}  // namespace segflow
