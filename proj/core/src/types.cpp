#include "segflow/types.hpp"

#include <cmath>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

void check_binary(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0 && t[i] != 1.0) throw ShapeError(std::string(what) + " must be binary");
}

}  // namespace

void FramePair::validate(int h, int w) const {
  require(frame_t.rank() == 3 && frame_t.dim(0) == 3 && frame_t.dim(1) == h && frame_t.dim(2) == w,
          "FramePair: frame_t must be (3,H,W) at input size");
  require(frame_t1.same_shape(frame_t), "FramePair: frame_t1 shape mismatch");
  if (mask_gt) {
    require(mask_gt->rank() == 2 && mask_gt->dim(0) == h && mask_gt->dim(1) == w,
            "FramePair: mask_gt shape mismatch");
    check_binary(*mask_gt, "FramePair: mask_gt");
  }
  if (flow_gt)
    require(flow_gt->rank() == 3 && flow_gt->dim(0) == 2 && flow_gt->dim(1) == h &&
                flow_gt->dim(2) == w,
            "FramePair: flow_gt shape mismatch");
  if (flow_valid) {
    require(flow_valid->rank() == 2 && flow_valid->dim(0) == h && flow_valid->dim(1) == w,
            "FramePair: flow_valid shape mismatch");
    check_binary(*flow_valid, "FramePair: flow_valid");
  }
}

const PyramidLevel* FeaturePyramid::find(int scale) const {
  for (const auto& level : levels)
    if (level.scale == scale) return &level;
  return nullptr;
}

void FeaturePyramid::validate(int input_h, int input_w) const {
  int prev = 0;
  for (const auto& level : levels) {
    require(level.scale > prev, "FeaturePyramid: scale denominators must strictly increase");
    prev = level.scale;
    require(level.features.rank() == 3, "FeaturePyramid: levels must be (C,h,w)");
    require(input_h % level.scale == 0 && input_w % level.scale == 0,
            "FeaturePyramid: input size not divisible by scale");
    require(level.features.dim(1) == input_h / level.scale &&
                level.features.dim(2) == input_w / level.scale,
            "FeaturePyramid: level shape must equal input_size / scale");
  }
}

Tensor foreground_probability(const Tensor& seg_logits) {
  if (seg_logits.rank() != 3 || seg_logits.dim(0) != 2)
    throw ShapeError("foreground_probability: logits must be (2,H,W)");
  const int h = seg_logits.dim(1), w = seg_logits.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Tensor p({h, w});
  const double* z0 = seg_logits.data();
  const double* z1 = seg_logits.data() + n;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::max(z0[i], z1[i]);
    const double e0 = std::exp(z0[i] - m);
    const double e1 = std::exp(z1[i] - m);
    p[i] = e1 / (e0 + e1);
  }
  return p;
}

Tensor logits_to_mask(const Tensor& seg_logits) {
  Tensor p = foreground_probability(seg_logits);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = p[i] > 0.5 ? 1.0 : 0.0;
  return p;
}

Tensor hflip(const Tensor& t) {
  if (t.rank() == 2) {
    const int h = t.dim(0), w = t.dim(1);
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x) = t.at(y, w - 1 - x);
    return out;
  }
  if (t.rank() == 3) {
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(ch, y, x) = t.at(ch, y, w - 1 - x);
    return out;
  }
  throw ShapeError("hflip: expected rank 2 or 3");
}

}  // namespace segflow
