#pragma once

#include <filesystem>

#include "mrp/tensor.hpp"

namespace mrp {

/// Decodes an 8-bit PNG into a 3 x H x W tensor with values v / 255. Grayscale and
/// alpha inputs are converted to RGB. Throws InputError on failure.
Tensor3 read_png(const std::filesystem::path& path);

struct ImageSize {
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Reads only the PNG header.
ImageSize png_size(const std::filesystem::path& path);

/// Writes a 1- or 3-channel tensor as an 8-bit PNG, rounding clamp(v, 0, 1) * 255.
void write_png(const std::filesystem::path& path, const Tensor3& image);

}  // namespace mrp
