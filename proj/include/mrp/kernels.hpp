#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "mrp/tensor.hpp"

namespace mrp {

/// Convolution weights laid out [out_channels, in_channels, kernel_h, kernel_w].
struct ConvParams {
    std::span<const float> kernel;
    std::span<const float> bias;  // out_channels entries
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// 2-D cross-correlation with zero padding. Output spatial size is
/// floor((in + 2*padding - k) / stride) + 1. Throws ConfigError naming `layer`
/// when the parameters do not fit the input.
Tensor3 conv2d(const Tensor3& input, const ConvParams& params, std::string_view layer = "conv2d");

Tensor3 relu(const Tensor3& input);
void relu_inplace(Tensor3& t);

/// Max pooling without padding, floor output size.
Tensor3 maxpool2d(const Tensor3& input, std::size_t kernel, std::size_t stride,
                  std::string_view layer = "maxpool2d");

/// Bilinear resampling with half-pixel centers: source coordinate
/// s = (d + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor3 bilinear_resize(const Tensor3& input, std::size_t out_h, std::size_t out_w);

}  // namespace mrp
