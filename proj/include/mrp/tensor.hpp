#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mrp {

#ifdef MRP_ACCUMULATE_DOUBLE
using Accum = double;
#else
using Accum = float;
#endif

/// Dense channels x height x width array of floats, channel-major then row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f);
    Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data);

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    std::size_t plane_size() const { return height_ * width_; }
    bool empty() const { return data_.empty(); }

    float& at(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * height_ + y) * width_ + x];
    }
    float at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * height_ + y) * width_ + x];
    }

    std::span<float> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const float> plane(std::size_t c) const {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    const std::vector<float>& data() const { return data_; }

    bool same_shape(const Tensor3& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool all_finite() const;

    friend bool operator==(const Tensor3& a, const Tensor3& b) = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

}  // namespace mrp
