#pragma once

#include <array>
#include <vector>

#include "segflow/rng.hpp"
#include "segflow/types.hpp"

namespace segflow {

// Row-major 2x3 affine map [a b tx; c d ty] acting on (x, y) pixel
// coordinates.
struct AffineMatrix {
  std::array<double, 6> m = {1, 0, 0, 0, 1, 0};

  static AffineMatrix identity() { return {}; }
  std::array<double, 2> apply(double x, double y) const;
  AffineMatrix inverse() const;
  bool operator==(const AffineMatrix& other) const { return m == other.m; }
};

// Shift / rotation / horizontal flip / mild scale, all about the image
// center.
struct AffineParams {
  double shift_x = 0.0;
  double shift_y = 0.0;
  double rotation = 0.0;  // radians
  bool flip_horizontal = false;
  double scale = 1.0;

  bool is_identity() const;
  AffineMatrix matrix(int height, int width) const;
};

struct AffineRanges {
  double max_shift_frac = 0.10;   // of each image dimension
  double max_rotation = 0.2618;   // ~15 degrees
  double flip_probability = 0.5;
  double scale_min = 0.95;
  double scale_max = 1.05;

  void validate() const;  // throws ConfigError
};

// Small rigid object motion used to fabricate a next frame.
struct SynthesisParams {
  double displacement_x = 0.0;
  double displacement_y = 0.0;
  double object_rotation = 0.0;  // radians, about the mask centroid
};

struct SynthesisRanges {
  double max_displacement_frac = 0.05;  // of each image dimension
  double max_rotation = 0.0873;         // ~5 degrees

  void validate() const;
};

// Uniform draw within ranges; zero-width ranges give the identity.
AffineParams sample_affine(Rng& rng, const AffineRanges& ranges, int height, int width);
SynthesisParams sample_synthesis(Rng& rng, const SynthesisRanges& ranges, int height, int width);

// Applies one transform to every frame and mask of a sequence: frames are
// warped bilinearly, masks nearest-neighbor; pixels pulled from outside
// the canvas become zero (frames) / background (masks).
void apply_affine_sequence(std::vector<Tensor>& frames, std::vector<Tensor>& masks,
                           const AffineParams& params);

// Warps a flow field under the same image transform: the field is
// resampled spatially and the vectors are rotated/flipped/scaled by the
// linear part. Pixels pulled from outside the canvas become invalid.
void transform_flow(Tensor& flow, Tensor& flow_valid, const AffineParams& params);

struct SynthesizedFrame {
  Tensor frame;       // fabricated next frame, occlusion holes black
  Tensor flow_gt;     // per-pixel object displacement inside mask, 0 outside
  Tensor flow_valid;  // all ones unless strict_occlusion is set
  Tensor covered;     // (H,W) 1 where the moved object landed (exposed for oracles)
};

// Moves the masked foreground rigidly to fabricate a next frame. Vacated
// source pixels the moved object no longer covers are left black. The
// ground-truth flow maps frame-t pixels forward, so vacated pixels keep
// their defined motion; with strict_occlusion, background pixels hidden
// by the arriving object and foreground pixels leaving the canvas are
// marked invalid instead.
SynthesizedFrame synthesize_next_frame(const Tensor& frame, const Tensor& mask,
                                       const SynthesisParams& params,
                                       bool strict_occlusion = false);

// First-frame augmentation: affine-transform (frame, mask), then fabricate
// the motion pair. With synthesize_motion false the pair is static
// (frame' = frame, no flow ground truth) — the flow-augmentation ablation.
std::vector<FramePair> augment_dataset(const Tensor& frame, const Tensor& mask, int n_samples,
                                       Rng& rng, const AffineRanges& affine_ranges = {},
                                       const SynthesisRanges& synthesis_ranges = {},
                                       bool apply_affine = true, bool synthesize_motion = true);

// Shared samplers (bilinear for intensities, nearest for labels). Out-of-
// range coordinates return fill.
double sample_bilinear(const Tensor& plane, double x, double y, double fill);
double sample_nearest(const Tensor& plane, double x, double y, double fill);

}  // namespace segflow
