#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segflow/tensor.hpp"

namespace segflow {

// On-disk flow field in the Middlebury .flo layout: float32 magic
// 202021.25, int32 width, int32 height, then row-major interleaved
// float32 (u, v) per pixel, all little-endian. Component values above
// kUnknownFlowThreshold mark pixels with unknown flow.
struct FlowField {
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<float> u;  // row-major, width*height
  std::vector<float> v;
};

inline constexpr float kFloMagic = 202021.25f;
inline constexpr float kUnknownFlowThreshold = 1e9f;
inline constexpr float kUnknownFlowValue = 1e10f;

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& field, const std::filesystem::path& path);

// Conversions between the disk container and (2,H,W) tensors with a
// binary validity mask; unknown-flow sentinels map to valid = 0 and back.
FlowField flow_to_field(const Tensor& flow, const Tensor* flow_valid = nullptr);
void field_to_flow(const FlowField& field, Tensor& flow, Tensor& flow_valid);

}  // namespace segflow
