#include "mrp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrp/error.hpp"

namespace mrp {

namespace {

void check_dims(std::size_t c, std::size_t h, std::size_t w) {
    if (c == 0 || h == 0 || w == 0) {
        throw ConfigError("tensor dimensions must be >= 1, got " + std::to_string(c) + "x" +
                          std::to_string(h) + "x" + std::to_string(w));
    }
}

}  // namespace

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width, float fill)
    : channels_(channels), height_(height), width_(width) {
    check_dims(channels, height, width);
    data_.assign(channels * height * width, fill);
}

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width,
                 std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    check_dims(channels, height, width);
    if (data_.size() != channels * height * width) {
        throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + std::to_string(channels) + "x" +
                          std::to_string(height) + "x" + std::to_string(width));
    }
}

bool Tensor3::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace mrp
