#include "segflow/flow_color.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segflow/errors.hpp"

namespace segflow {

namespace {

// HSV (h in [0,1)) to RGB with s, v in [0,1].
void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double hh = h * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

}  // namespace

Tensor flow_to_color(const Tensor& flow, double max_magnitude) {
  if (flow.rank() != 3 || flow.dim(0) != 2) throw ShapeError("flow_to_color: flow must be (2,H,W)");
  if (!flow.all_finite()) throw ShapeError("flow_to_color: non-finite flow");
  const int h = flow.dim(1), w = flow.dim(2);
  double max_mag = max_magnitude;
  if (max_mag <= 0.0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        max_mag = std::max(max_mag, std::hypot(flow.at(0, y, x), flow.at(1, y, x)));
  }
  Tensor out({3, h, w});
  double rgb[3];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = flow.at(0, y, x), v = flow.at(1, y, x);
      const double mag = std::hypot(u, v);
      const double sat = max_mag > 0.0 ? std::min(mag / max_mag, 1.0) : 0.0;
      double hue = std::atan2(v, u) / (2.0 * std::numbers::pi);
      if (hue < 0.0) hue += 1.0;
      if (hue >= 1.0) hue = 0.0;
      hsv_to_rgb(hue, sat, 1.0, rgb);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[c];
    }
  return out;
}

}  // namespace segflow
