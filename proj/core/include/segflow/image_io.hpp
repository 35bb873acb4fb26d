#pragma once

#include <filesystem>

#include "segflow/tensor.hpp"

namespace segflow {

// 8-bit PNG I/O. Images load as (3,H,W) tensors in [0,1] (gray files are
// replicated across channels, alpha is dropped); masks load as binary
// (H,W) tensors where any nonzero sample is foreground. Writers quantize
// with round(v * 255).
Tensor read_image_png(const std::filesystem::path& path);
Tensor read_mask_png(const std::filesystem::path& path);
void write_image_png(const Tensor& image, const std::filesystem::path& path);
void write_mask_png(const Tensor& mask, const std::filesystem::path& path);

}  // namespace segflow
