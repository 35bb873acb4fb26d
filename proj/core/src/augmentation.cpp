#include "segflow/augmentation.hpp"

#include <cmath>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

AffineMatrix compose(const AffineMatrix& a, const AffineMatrix& b) {
  // (a ∘ b)(p) = a(b(p))
  AffineMatrix r;
  r.m[0] = a.m[0] * b.m[0] + a.m[1] * b.m[3];
  r.m[1] = a.m[0] * b.m[1] + a.m[1] * b.m[4];
  r.m[2] = a.m[0] * b.m[2] + a.m[1] * b.m[5] + a.m[2];
  r.m[3] = a.m[3] * b.m[0] + a.m[4] * b.m[3];
  r.m[4] = a.m[3] * b.m[1] + a.m[4] * b.m[4];
  r.m[5] = a.m[3] * b.m[2] + a.m[4] * b.m[5] + a.m[5];
  return r;
}

AffineMatrix translation(double tx, double ty) {
  AffineMatrix t;
  t.m[2] = tx;
  t.m[5] = ty;
  return t;
}

Tensor channel_view(const Tensor& t, int c) {
  const int h = t.dim(1), w = t.dim(2);
  Tensor out({h, w});
  const double* src = t.data() + static_cast<std::size_t>(c) * h * w;
  std::copy(src, src + out.size(), out.data());
  return out;
}

}  // namespace

std::array<double, 2> AffineMatrix::apply(double x, double y) const {
  return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
}

AffineMatrix AffineMatrix::inverse() const {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (det == 0.0) throw ConfigError("AffineMatrix: singular transform");
  AffineMatrix r;
  r.m[0] = m[4] / det;
  r.m[1] = -m[1] / det;
  r.m[3] = -m[3] / det;
  r.m[4] = m[0] / det;
  r.m[2] = -(r.m[0] * m[2] + r.m[1] * m[5]);
  r.m[5] = -(r.m[3] * m[2] + r.m[4] * m[5]);
  return r;
}

bool AffineParams::is_identity() const {
  return shift_x == 0.0 && shift_y == 0.0 && rotation == 0.0 && !flip_horizontal && scale == 1.0;
}

AffineMatrix AffineParams::matrix(int height, int width) const {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  AffineMatrix lin;
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double fx = flip_horizontal ? -1.0 : 1.0;
  lin.m = {scale * c * fx, -scale * s, 0.0, scale * s * fx, scale * c, 0.0};
  AffineMatrix about_center = compose(translation(cx, cy), compose(lin, translation(-cx, -cy)));
  return compose(translation(shift_x, shift_y), about_center);
}

void AffineRanges::validate() const {
  if (max_shift_frac < 0 || max_rotation < 0 || flip_probability < 0 || flip_probability > 1 ||
      scale_min <= 0 || scale_max < scale_min)
    throw ConfigError("AffineRanges: malformed sampling ranges");
}

void SynthesisRanges::validate() const {
  if (max_displacement_frac < 0 || max_rotation < 0)
    throw ConfigError("SynthesisRanges: malformed sampling ranges");
}

AffineParams sample_affine(Rng& rng, const AffineRanges& ranges, int height, int width) {
  ranges.validate();
  AffineParams p;
  const double sx = ranges.max_shift_frac * width;
  const double sy = ranges.max_shift_frac * height;
  p.shift_x = sx > 0 ? rng.uniform(-sx, sx) : 0.0;
  p.shift_y = sy > 0 ? rng.uniform(-sy, sy) : 0.0;
  p.rotation = ranges.max_rotation > 0 ? rng.uniform(-ranges.max_rotation, ranges.max_rotation) : 0.0;
  p.flip_horizontal = ranges.flip_probability > 0 && rng.bernoulli(ranges.flip_probability);
  p.scale = ranges.scale_max > ranges.scale_min ? rng.uniform(ranges.scale_min, ranges.scale_max)
                                                : ranges.scale_min;
  return p;
}

SynthesisParams sample_synthesis(Rng& rng, const SynthesisRanges& ranges, int height, int width) {
  ranges.validate();
  SynthesisParams p;
  const double dx = ranges.max_displacement_frac * width;
  const double dy = ranges.max_displacement_frac * height;
  p.displacement_x = dx > 0 ? rng.uniform(-dx, dx) : 0.0;
  p.displacement_y = dy > 0 ? rng.uniform(-dy, dy) : 0.0;
  p.object_rotation = ranges.max_rotation > 0 ? rng.uniform(-ranges.max_rotation, ranges.max_rotation) : 0.0;
  return p;
}

double sample_bilinear(const Tensor& plane, double x, double y, double fill) {
  const int h = plane.dim(0), w = plane.dim(1);
  if (x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0) return fill;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double tx = x - x0, ty = y - y0;
  return (1 - ty) * ((1 - tx) * plane.at(y0, x0) + tx * plane.at(y0, x1)) +
         ty * ((1 - tx) * plane.at(y1, x0) + tx * plane.at(y1, x1));
}

double sample_nearest(const Tensor& plane, double x, double y, double fill) {
  const int h = plane.dim(0), w = plane.dim(1);
  const int xi = static_cast<int>(std::lround(x));
  const int yi = static_cast<int>(std::lround(y));
  if (xi < 0 || yi < 0 || xi >= w || yi >= h) return fill;
  return plane.at(yi, xi);
}

namespace {

Tensor warp_image(const Tensor& image, const AffineMatrix& inv) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({c, h, w});
  std::vector<Tensor> planes;
  planes.reserve(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) planes.push_back(channel_view(image, ch));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto src = inv.apply(x, y);
      for (int ch = 0; ch < c; ++ch)
        out.at(ch, y, x) = sample_bilinear(planes[static_cast<std::size_t>(ch)], src[0], src[1], 0.0);
    }
  return out;
}

Tensor warp_mask(const Tensor& mask, const AffineMatrix& inv) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto src = inv.apply(x, y);
      out.at(y, x) = sample_nearest(mask, src[0], src[1], 0.0) >= 0.5 ? 1.0 : 0.0;
    }
  return out;
}

}  // namespace

void apply_affine_sequence(std::vector<Tensor>& frames, std::vector<Tensor>& masks,
                           const AffineParams& params) {
  if (frames.empty()) return;
  if (params.is_identity()) return;
  const int h = frames.front().dim(1), w = frames.front().dim(2);
  // One matrix for the whole sequence keeps inter-frame consistency.
  const AffineMatrix inv = params.matrix(h, w).inverse();
  for (auto& f : frames) f = warp_image(f, inv);
  for (auto& m : masks) m = warp_mask(m, inv);
}

void transform_flow(Tensor& flow, Tensor& flow_valid, const AffineParams& params) {
  if (params.is_identity()) return;
  const int h = flow.dim(1), w = flow.dim(2);
  const AffineMatrix fwd = params.matrix(h, w);
  const AffineMatrix inv = fwd.inverse();
  const Tensor u = channel_view(flow, 0);
  const Tensor v = channel_view(flow, 1);
  const Tensor valid_in = flow_valid;
  Tensor out({2, h, w});
  Tensor valid_out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto src = inv.apply(x, y);
      const bool inside =
          src[0] >= 0.0 && src[1] >= 0.0 && src[0] <= w - 1.0 && src[1] <= h - 1.0;
      if (!inside) {
        valid_out.at(y, x) = 0.0;
        continue;
      }
      const double su = sample_bilinear(u, src[0], src[1], 0.0);
      const double sv = sample_bilinear(v, src[0], src[1], 0.0);
      // Linear part only: translations of the image do not change motion.
      out.at(0, y, x) = fwd.m[0] * su + fwd.m[1] * sv;
      out.at(1, y, x) = fwd.m[3] * su + fwd.m[4] * sv;
      valid_out.at(y, x) = sample_nearest(valid_in, src[0], src[1], 0.0) >= 0.5 ? 1.0 : 0.0;
    }
  flow = std::move(out);
  flow_valid = std::move(valid_out);
}

SynthesizedFrame synthesize_next_frame(const Tensor& frame, const Tensor& mask,
                                       const SynthesisParams& params, bool strict_occlusion) {
  if (frame.rank() != 3 || mask.rank() != 2 || frame.dim(1) != mask.dim(0) ||
      frame.dim(2) != mask.dim(1))
    throw ShapeError("synthesize_next_frame: frame/mask shape mismatch");
  const int c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);

  double cx = 0.0, cy = 0.0, area = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(y, x) == 1.0) {
        cx += x;
        cy += y;
        area += 1.0;
      }
  if (area == 0.0) throw DataError("synthesize_next_frame: empty mask");
  cx /= area;
  cy /= area;

  // Rigid object motion about the mask centroid.
  AffineMatrix lin;
  const double co = std::cos(params.object_rotation), si = std::sin(params.object_rotation);
  lin.m = {co, -si, 0.0, si, co, 0.0};
  const AffineMatrix fwd =
      compose(translation(params.displacement_x, params.displacement_y),
              compose(translation(cx, cy), compose(lin, translation(-cx, -cy))));
  const AffineMatrix inv = fwd.inverse();

  std::vector<Tensor> planes;
  planes.reserve(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) planes.push_back(channel_view(frame, ch));

  SynthesizedFrame out;
  out.frame = Tensor({c, h, w});
  out.flow_gt = Tensor({2, h, w});
  out.flow_valid = Tensor::full({h, w}, 1.0);
  out.covered = Tensor({h, w});

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto src = inv.apply(x, y);
      const bool covered = sample_nearest(mask, src[0], src[1], 0.0) == 1.0;
      if (covered) {
        out.covered.at(y, x) = 1.0;
        for (int ch = 0; ch < c; ++ch)
          out.frame.at(ch, y, x) =
              sample_bilinear(planes[static_cast<std::size_t>(ch)], src[0], src[1], 0.0);
      } else if (mask.at(y, x) == 1.0) {
        // Vacated and not re-covered: occlusion hole, left black.
        for (int ch = 0; ch < c; ++ch) out.frame.at(ch, y, x) = 0.0;
      } else {
        for (int ch = 0; ch < c; ++ch) out.frame.at(ch, y, x) = frame.at(ch, y, x);
      }
    }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) == 1.0) {
        const auto dst = fwd.apply(x, y);
        out.flow_gt.at(0, y, x) = dst[0] - x;
        out.flow_gt.at(1, y, x) = dst[1] - y;
        if (strict_occlusion && (dst[0] < 0.0 || dst[1] < 0.0 || dst[0] > w - 1.0 || dst[1] > h - 1.0))
          out.flow_valid.at(y, x) = 0.0;
      } else if (strict_occlusion && out.covered.at(y, x) == 1.0) {
        // Background hidden by the arriving object.
        out.flow_valid.at(y, x) = 0.0;
      }
    }
  return out;
}

std::vector<FramePair> augment_dataset(const Tensor& frame, const Tensor& mask, int n_samples,
                                       Rng& rng, const AffineRanges& affine_ranges,
                                       const SynthesisRanges& synthesis_ranges, bool apply_affine,
                                       bool synthesize_motion) {
  if (n_samples < 1) throw ConfigError("augment_dataset: n_samples must be >= 1");
  const int h = frame.dim(1), w = frame.dim(2);
  std::vector<FramePair> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    std::vector<Tensor> frames{frame};
    std::vector<Tensor> masks{mask};
    if (apply_affine) {
      for (int attempt = 0; attempt < 16; ++attempt) {
        std::vector<Tensor> try_frames{frame};
        std::vector<Tensor> try_masks{mask};
        const AffineParams params = sample_affine(rng, affine_ranges, h, w);
        apply_affine_sequence(try_frames, try_masks, params);
        // A transform may push the whole object off-canvas; resample.
        bool nonempty = false;
        for (std::size_t p = 0; p < try_masks[0].size() && !nonempty; ++p)
          nonempty = try_masks[0][p] == 1.0;
        if (nonempty) {
          frames = std::move(try_frames);
          masks = std::move(try_masks);
          break;
        }
      }
    }
    FramePair pair;
    pair.frame_t = frames[0];
    pair.mask_gt = masks[0];
    if (synthesize_motion) {
      const SynthesisParams sp = sample_synthesis(rng, synthesis_ranges, h, w);
      SynthesizedFrame synth = synthesize_next_frame(frames[0], masks[0], sp);
      pair.frame_t1 = std::move(synth.frame);
      pair.flow_gt = std::move(synth.flow_gt);
      pair.flow_valid = std::move(synth.flow_valid);
    } else {
      pair.frame_t1 = frames[0];
    }
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace segflow
