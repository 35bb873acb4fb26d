#include "segflow/scene_gen.hpp"

#include <cmath>
#include <numbers>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = mix_u64(seed ^ mix_u64(static_cast<std::uint64_t>(ix) * 0x100000001b3ull ^
                                           mix_u64(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double noise_octave(double x, double y, std::uint64_t seed, double cell) {
  const double fx = x / cell, fy = y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(fx));
  const auto iy = static_cast<std::int64_t>(std::floor(fy));
  const double tx = smoothstep(fx - std::floor(fx));
  const double ty = smoothstep(fy - std::floor(fy));
  const double v00 = lattice_value(ix, iy, seed);
  const double v01 = lattice_value(ix + 1, iy, seed);
  const double v10 = lattice_value(ix, iy + 1, seed);
  const double v11 = lattice_value(ix + 1, iy + 1, seed);
  return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
}

struct Pose {
  double cx, cy, angle;
};

Pose pose_at(const SceneObject& obj, int frame, double shake_x, double shake_y) {
  return {obj.center_x + frame * obj.velocity_x + shake_x,
          obj.center_y + frame * obj.velocity_y + shake_y,
          obj.angle + frame * obj.angular_velocity};
}

bool inside_object(const SceneObject& obj, const Pose& pose, double x, double y) {
  // Back to object-local coordinates.
  const double dx = x - pose.cx, dy = y - pose.cy;
  const double c = std::cos(-pose.angle), s = std::sin(-pose.angle);
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  switch (obj.kind) {
    case ShapeKind::kEllipse: {
      const double ex = lx / obj.size_a, ey = ly / obj.size_b;
      return ex * ex + ey * ey <= 1.0;
    }
    case ShapeKind::kRectangle:
      return std::fabs(lx) <= obj.size_a && std::fabs(ly) <= obj.size_b;
    case ShapeKind::kPolygon: {
      const auto& poly = obj.polygon;
      if (poly.size() < 3) return false;
      bool in = false;
      for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const double xi = poly[i][0], yi = poly[i][1];
        const double xj = poly[j][0], yj = poly[j][1];
        if ((yi > ly) != (yj > ly) && lx < (xj - xi) * (ly - yi) / (yj - yi) + xi) in = !in;
      }
      return in;
    }
  }
  return false;
}

// Image position at frame t+1 of the scene point currently at (x, y).
std::array<double, 2> advect(const Pose& now, const Pose& next, double x, double y) {
  const double dx = x - now.cx, dy = y - now.cy;
  const double c = std::cos(next.angle - now.angle), s = std::sin(next.angle - now.angle);
  return {next.cx + c * dx - s * dy, next.cy + s * dx + c * dy};
}

double quantize8(double v) {
  return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

double value_noise(double x, double y, std::uint64_t seed) {
  // Base cell 32 keeps the field smooth enough that bilinear resampling
  // error stays well inside the warp-consistency tolerances.
  double acc = 0.0, amp = 1.0, total = 0.0, cell = 32.0;
  for (int octave = 0; octave < 3; ++octave) {
    acc += amp * noise_octave(x, y, mix_u64(seed + static_cast<std::uint64_t>(octave)), cell);
    total += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  return acc / total;
}

GeneratedScene generate_scene(const ShapeSceneSpec& spec, Rng& rng) {
  if (spec.frames < 2) throw ConfigError("generate_scene: need at least 2 frames");
  if (spec.width <= 0 || spec.height <= 0) throw ConfigError("generate_scene: bad canvas");
  if (spec.target_object >= static_cast<int>(spec.objects.size()))
    throw ConfigError("generate_scene: target_object out of range");
  const int w = spec.width, h = spec.height, n = spec.frames;

  // Whole-pixel camera shake keeps the analytic flow integer-valued.
  std::vector<std::array<double, 2>> shake(static_cast<std::size_t>(n), {0.0, 0.0});
  if (spec.camera_shake > 0.0) {
    const auto amp = static_cast<long>(std::floor(spec.camera_shake));
    for (int t = 1; t < n; ++t) {
      shake[static_cast<std::size_t>(t)][0] =
          static_cast<double>(static_cast<long>(rng.below(2 * amp + 1)) - amp);
      shake[static_cast<std::size_t>(t)][1] =
          static_cast<double>(static_cast<long>(rng.below(2 * amp + 1)) - amp);
    }
  }

  GeneratedScene scene;
  scene.spec = spec;
  std::vector<std::vector<Pose>> poses(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    auto& frame_poses = poses[static_cast<std::size_t>(t)];
    for (const auto& obj : spec.objects)
      frame_poses.push_back(pose_at(obj, t, shake[static_cast<std::size_t>(t)][0],
                                    shake[static_cast<std::size_t>(t)][1]));
  }

  for (int t = 0; t < n; ++t) {
    Tensor frame({3, h, w});
    Tensor owner = Tensor::full({h, w}, -1.0);
    const auto& sh = shake[static_cast<std::size_t>(t)];

    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        // Background scrolls with the camera offset.
        const double wx = x - sh[0], wy = y - sh[1];
        int top = -1;
        for (int i = 0; i < static_cast<int>(spec.objects.size()); ++i)
          if (inside_object(spec.objects[static_cast<std::size_t>(i)],
                            poses[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)], x, y))
            top = i;  // later objects draw on top
        owner.at(y, x) = top;
        for (int c = 0; c < 3; ++c) {
          const double tex =
              value_noise(wx, wy, spec.background_seed + static_cast<std::uint64_t>(c) * 7919);
          double v = 0.25 + 0.5 * tex;
          if (top >= 0) {
            const auto& obj = spec.objects[static_cast<std::size_t>(top)];
            // Object texture rides along in object-local coordinates.
            const Pose& p =
                poses[static_cast<std::size_t>(t)][static_cast<std::size_t>(top)];
            const double dx = x - p.cx, dy = y - p.cy;
            const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
            const double obj_tex = value_noise(
                ca * dx - sa * dy + 40.0, sa * dx + ca * dy + 40.0,
                spec.background_seed + 31337 + static_cast<std::uint64_t>(c) * 7919);
            v = obj.texture_mix * (0.25 + 0.5 * obj_tex) +
                (1.0 - obj.texture_mix) * obj.color[static_cast<std::size_t>(c)];
          }
          frame.at(c, y, x) = quantize8(v);
        }
      }

    // Stay-inside check against the unclipped support.
    for (int i = 0; i < static_cast<int>(spec.objects.size()); ++i) {
      const auto& obj = spec.objects[static_cast<std::size_t>(i)];
      const Pose& p = poses[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      const int margin = static_cast<int>(std::ceil(std::max(obj.size_a, obj.size_b))) + 2;
      std::size_t total = 0;
      for (int y = -margin; y < h + margin; ++y)
        for (int x = -margin; x < w + margin; ++x)
          if (inside_object(obj, p, x, y)) ++total;
      // Pixels inside the canvas where this object is the top owner can
      // undercount (another object on top); count raw support instead.
      std::size_t inside = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (inside_object(obj, p, x, y)) ++inside;
      if (total == 0 || static_cast<double>(inside) <
                            spec.min_inside_fraction * static_cast<double>(total))
        throw ConfigError("generate_scene: object " + std::to_string(i) + " leaves the canvas at frame " +
                          std::to_string(t));
    }

    Tensor mask({h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int top = static_cast<int>(owner.at(y, x));
        mask.at(y, x) =
            (top >= 0 && (spec.target_object < 0 || top == spec.target_object)) ? 1.0 : 0.0;
      }

    scene.frames.push_back(std::move(frame));
    scene.masks.push_back(std::move(mask));
    scene.owner_maps.push_back(std::move(owner));
  }

  for (int t = 0; t + 1 < n; ++t) {
    Tensor flow({2, h, w});
    Tensor valid = Tensor::full({h, w}, 1.0);
    const auto& owner_now = scene.owner_maps[static_cast<std::size_t>(t)];
    const auto& owner_next = scene.owner_maps[static_cast<std::size_t>(t + 1)];
    const double shake_du = shake[static_cast<std::size_t>(t + 1)][0] - shake[static_cast<std::size_t>(t)][0];
    const double shake_dv = shake[static_cast<std::size_t>(t + 1)][1] - shake[static_cast<std::size_t>(t)][1];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int who = static_cast<int>(owner_now.at(y, x));
        double tx, ty;
        if (who < 0) {
          tx = x + shake_du;
          ty = y + shake_dv;
        } else {
          const auto dst =
              advect(poses[static_cast<std::size_t>(t)][static_cast<std::size_t>(who)],
                     poses[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(who)], x, y);
          tx = dst[0];
          ty = dst[1];
        }
        // Store at float precision so the .flo round trip is exact.
        flow.at(0, y, x) = static_cast<double>(static_cast<float>(tx - x));
        flow.at(1, y, x) = static_cast<double>(static_cast<float>(ty - y));
        const int rx = static_cast<int>(std::lround(tx));
        const int ry = static_cast<int>(std::lround(ty));
        if (rx < 0 || ry < 0 || rx >= w || ry >= h)
          valid.at(y, x) = 0.0;  // leaves the canvas
        else if (static_cast<int>(owner_next.at(ry, rx)) != who)
          valid.at(y, x) = 0.0;  // occluded or disoccluded at the target
      }
    scene.flows.push_back(std::move(flow));
    scene.flow_valids.push_back(std::move(valid));
  }
  return scene;
}

std::vector<FramePair> GeneratedScene::to_pairs() const {
  std::vector<FramePair> pairs;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    FramePair p;
    p.frame_t = frames[t];
    p.frame_t1 = frames[t + 1];
    p.mask_gt = masks[t];
    p.flow_gt = flows[t];
    p.flow_valid = flow_valids[t];
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<ShapeSceneSpec> make_corpus_specs(int n_seqs, int width, int height, int frames,
                                              Rng& rng, int max_objects) {
  if (max_objects < 1) throw ConfigError("make_corpus_specs: max_objects must be >= 1");
  std::vector<ShapeSceneSpec> specs;
  const double min_dim = std::min(width, height);
  for (int s = 0; s < n_seqs; ++s) {
    ShapeSceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.frames = frames;
    spec.background_seed = rng.next_u64();
    spec.camera_shake = 1.0;
    const int n_objects = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_objects)));
    for (int i = 0; i < n_objects; ++i) {
      SceneObject obj;
      const int kind = static_cast<int>(rng.below(3));
      obj.kind = kind == 0 ? ShapeKind::kEllipse
                           : (kind == 1 ? ShapeKind::kRectangle : ShapeKind::kPolygon);
      obj.size_a = rng.uniform(0.12, 0.2) * min_dim;
      obj.size_b = rng.uniform(0.10, 0.18) * min_dim;
      if (obj.kind == ShapeKind::kPolygon) {
        const int verts = 5;
        for (int k = 0; k < verts; ++k) {
          const double a = 2.0 * std::numbers::pi * k / verts;
          const double r = obj.size_a * rng.uniform(0.7, 1.0);
          obj.polygon.push_back({r * std::cos(a), r * std::sin(a)});
        }
      }
      // Integer velocity, at least one pixel per frame, so motion is the
      // dependable cue and ground truth stays exact.
      do {
        obj.velocity_x = static_cast<double>(static_cast<long>(rng.below(5)) - 2);
        obj.velocity_y = static_cast<double>(static_cast<long>(rng.below(5)) - 2);
      } while (obj.velocity_x == 0.0 && obj.velocity_y == 0.0);
      obj.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      obj.angular_velocity = 0.0;
      obj.color = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)};
      obj.texture_mix = 0.65;
      // Keep the full trajectory (plus shake slack) inside the canvas,
      // shrinking the velocity if the canvas cannot fit it.
      const double margin = std::max(obj.size_a, obj.size_b) + 3.0;
      for (;;) {
        const double travel_x = obj.velocity_x * (frames - 1);
        const double travel_y = obj.velocity_y * (frames - 1);
        const double lo_x = margin + std::max(0.0, -travel_x);
        const double hi_x = width - margin - std::max(0.0, travel_x);
        const double lo_y = margin + std::max(0.0, -travel_y);
        const double hi_y = height - margin - std::max(0.0, travel_y);
        if (lo_x < hi_x && lo_y < hi_y) {
          obj.center_x = rng.uniform(lo_x, hi_x);
          obj.center_y = rng.uniform(lo_y, hi_y);
          break;
        }
        if (std::fabs(obj.velocity_x) >= std::fabs(obj.velocity_y) && std::fabs(obj.velocity_x) > 1.0)
          obj.velocity_x = obj.velocity_x > 0 ? obj.velocity_x - 1.0 : obj.velocity_x + 1.0;
        else if (std::fabs(obj.velocity_y) > 1.0)
          obj.velocity_y = obj.velocity_y > 0 ? obj.velocity_y - 1.0 : obj.velocity_y + 1.0;
        else
          throw ConfigError("make_corpus_specs: canvas too small for any trajectory");
      }
      spec.objects.push_back(std::move(obj));
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace segflow
