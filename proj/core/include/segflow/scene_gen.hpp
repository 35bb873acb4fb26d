#pragma once

#include <array>
#include <string>
#include <vector>

#include "segflow/rng.hpp"
#include "segflow/types.hpp"

namespace segflow {

enum class ShapeKind { kEllipse, kRectangle, kPolygon };

// One rigid moving shape. Pose is the image-space center plus an angle;
// per-frame motion is a constant velocity and angular velocity. Polygon
// vertices are in object-local coordinates.
struct SceneObject {
  ShapeKind kind = ShapeKind::kEllipse;
  double center_x = 0.0, center_y = 0.0;
  double angle = 0.0;
  double size_a = 8.0, size_b = 6.0;  // radii / half-extents
  std::vector<std::array<double, 2>> polygon;
  double velocity_x = 0.0, velocity_y = 0.0;
  double angular_velocity = 0.0;
  std::array<double, 3> color = {0.8, 0.3, 0.3};
  // Fraction of the object fill taken from the background noise palette;
  // high values camouflage the object so motion carries the signal.
  double texture_mix = 0.65;
};

struct ShapeSceneSpec {
  int width = 64, height = 64;
  int frames = 8;
  std::uint64_t background_seed = 0;
  std::vector<SceneObject> objects;
  // Uniform per-frame global translation in [-amplitude, amplitude]^2,
  // rounded to whole pixels so ground truth flow stays integer. 0 = off.
  double camera_shake = 0.0;
  // Annotation target: -1 = union of all objects, else the object index.
  int target_object = -1;
  double min_inside_fraction = 0.6;
};

struct GeneratedScene {
  ShapeSceneSpec spec;
  std::vector<Tensor> frames;       // (3,H,W), quantized to 8-bit levels
  std::vector<Tensor> masks;        // (H,W), target annotation per frame
  std::vector<Tensor> flows;        // frames-1 entries, (2,H,W), float-exact
  std::vector<Tensor> flow_valids;  // frames-1 entries, (H,W)
  std::vector<Tensor> owner_maps;   // (H,W): -1 background, else object idx

  std::vector<FramePair> to_pairs() const;  // consecutive pairs with all ground truths
};

// Renders the scene: seeded value-noise background plus the moving shapes
// (later objects draw on top), analytic ground-truth flow composed from
// object motion and camera shake, and validity masks that exclude pixels
// whose forward-mapped target leaves the canvas or lands under a
// different owner. Throws ConfigError when an object dips below
// min_inside_fraction of its support inside the canvas.
GeneratedScene generate_scene(const ShapeSceneSpec& spec, Rng& rng);

// Smooth seeded value noise in [0,1]; continuous in (x, y).
double value_noise(double x, double y, std::uint64_t seed);

// Desk-scale stand-in corpus: n_seqs randomized specs (camouflaged
// objects, integer velocities, mild integer camera shake). Each scene
// draws 1..max_objects shapes.
std::vector<ShapeSceneSpec> make_corpus_specs(int n_seqs, int width, int height, int frames,
                                              Rng& rng, int max_objects = 2);

}  // namespace segflow
