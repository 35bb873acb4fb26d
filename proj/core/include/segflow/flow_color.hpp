#pragma once

#include "segflow/tensor.hpp"

namespace segflow {

// Color-wheel rendering of a flow field: hue from atan2(v, u), saturation
// proportional to magnitude / max_magnitude (clipped to 1), value 1.
// Zero flow maps to white. max_magnitude <= 0 selects the field maximum.
Tensor flow_to_color(const Tensor& flow, double max_magnitude = 0.0);

}  // namespace segflow
