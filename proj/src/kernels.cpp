#include "mrp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mrp/error.hpp"

namespace mrp {

namespace {

std::string shape_str(const Tensor3& t) {
    return std::to_string(t.channels()) + "x" + std::to_string(t.height()) + "x" +
           std::to_string(t.width());
}

// Half-open range of output columns whose tap (o * stride + k - pad) lands in [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t pad, std::size_t stride,
                                                 std::size_t extent, std::size_t out) {
    const auto offset = static_cast<long>(k) - static_cast<long>(pad);
    const auto s = static_cast<long>(stride);
    long lo = 0;
    if (offset < 0) lo = (-offset + s - 1) / s;
    // largest o with o*s + offset <= extent - 1
    long hi = static_cast<long>(extent) - 1 - offset;
    hi = hi < 0 ? -1 : hi / s;
    hi = std::min(hi, static_cast<long>(out) - 1);
    if (hi < lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
}

struct Tap {
    std::size_t lo;
    std::size_t hi;
    float frac;
};

std::vector<Tap> resize_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const float scale = static_cast<float>(in) / static_cast<float>(out);
    const float max_coord = static_cast<float>(in - 1);
    for (std::size_t d = 0; d < out; ++d) {
        float s = (static_cast<float>(d) + 0.5f) * scale - 0.5f;
        s = std::clamp(s, 0.0f, max_coord);
        const auto lo = static_cast<std::size_t>(s);
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[d] = {lo, hi, s - static_cast<float>(lo)};
    }
    return taps;
}

}  // namespace

Tensor3 conv2d(const Tensor3& input, const ConvParams& p, std::string_view layer) {
    const std::string name(layer);
    if (p.stride < 1) throw ConfigError(name + ": stride must be >= 1");
    if (p.kernel_h == 0 || p.kernel_w == 0 || p.out_channels == 0) {
        throw ConfigError(name + ": empty kernel");
    }
    if (input.channels() != p.in_channels) {
        throw ConfigError(name + ": expects " + std::to_string(p.in_channels) +
                          " input channels, got tensor " + shape_str(input));
    }
    if (p.kernel.size() != p.out_channels * p.in_channels * p.kernel_h * p.kernel_w) {
        throw ConfigError(name + ": kernel array length does not match declared shape");
    }
    if (p.bias.size() != p.out_channels) {
        throw ConfigError(name + ": bias length " + std::to_string(p.bias.size()) + " != " +
                          std::to_string(p.out_channels));
    }
    const std::size_t in_h = input.height();
    const std::size_t in_w = input.width();
    if (p.kernel_h > in_h + 2 * p.padding || p.kernel_w > in_w + 2 * p.padding) {
        throw ConfigError(name + ": kernel " + std::to_string(p.kernel_h) + "x" +
                          std::to_string(p.kernel_w) + " larger than padded input " +
                          shape_str(input));
    }
    const std::size_t out_h = (in_h + 2 * p.padding - p.kernel_h) / p.stride + 1;
    const std::size_t out_w = (in_w + 2 * p.padding - p.kernel_w) / p.stride + 1;

    // im2col: one row per (ic, ky, kx) tap, one column per output pixel, zeros where
    // the tap falls into the padding.
    const std::size_t n = out_h * out_w;
    const std::size_t k_total = p.in_channels * p.kernel_h * p.kernel_w;
    std::vector<float> cols(k_total * n, 0.0f);
    for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
        const float* src = input.plane(ic).data();
        for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
            const auto [oy0, oy1] = valid_range(ky, p.padding, p.stride, in_h, out_h);
            for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
                const auto [ox0, ox1] = valid_range(kx, p.padding, p.stride, in_w, out_w);
                float* dst = cols.data() + ((ic * p.kernel_h + ky) * p.kernel_w + kx) * n;
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const float* row = src + (oy * p.stride + ky - p.padding) * in_w;
                    for (std::size_t ox = ox0; ox < ox1; ++ox) {
                        dst[oy * out_w + ox] = row[ox * p.stride + kx - p.padding];
                    }
                }
            }
        }
    }

    // Each output accumulates its taps in (ic, ky, kx) order, then adds the bias.
    constexpr std::size_t kBlock = 8;
    Tensor3 out(p.out_channels, out_h, out_w);
    std::vector<Accum> acc(kBlock * n);
    for (std::size_t oc0 = 0; oc0 < p.out_channels; oc0 += kBlock) {
        const std::size_t nb = std::min(kBlock, p.out_channels - oc0);
        std::fill(acc.begin(), acc.end(), Accum{0});
        for (std::size_t k = 0; k < k_total; ++k) {
            const float* col = cols.data() + k * n;
            for (std::size_t j = 0; j < nb; ++j) {
                const Accum wv = p.kernel[(oc0 + j) * k_total + k];
                if (wv == Accum{0}) continue;
                Accum* a = acc.data() + j * n;
                for (std::size_t i = 0; i < n; ++i) a[i] += wv * col[i];
            }
        }
        for (std::size_t j = 0; j < nb; ++j) {
            auto dst = out.plane(oc0 + j);
            const Accum b = p.bias[oc0 + j];
            const Accum* a = acc.data() + j * n;
            for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(a[i] + b);
        }
    }
    if (!out.all_finite()) throw InputError(name + ": produced non-finite values");
    return out;
}

void relu_inplace(Tensor3& t) {
    for (float& v : t.values()) v = v > 0.0f ? v : 0.0f;
}

Tensor3 relu(const Tensor3& input) {
    Tensor3 out = input;
    relu_inplace(out);
    return out;
}

Tensor3 maxpool2d(const Tensor3& input, std::size_t kernel, std::size_t stride,
                  std::string_view layer) {
    const std::string name(layer);
    if (kernel == 0 || stride == 0) throw ConfigError(name + ": kernel and stride must be >= 1");
    if (kernel > input.height() || kernel > input.width()) {
        throw ConfigError(name + ": window " + std::to_string(kernel) + " larger than input " +
                          shape_str(input));
    }
    const std::size_t out_h = (input.height() - kernel) / stride + 1;
    const std::size_t out_w = (input.width() - kernel) / stride + 1;
    Tensor3 out(input.channels(), out_h, out_w);
    for (std::size_t c = 0; c < input.channels(); ++c) {
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                float m = input.at(c, oy * stride, ox * stride);
                for (std::size_t ky = 0; ky < kernel; ++ky) {
                    for (std::size_t kx = 0; kx < kernel; ++kx) {
                        m = std::max(m, input.at(c, oy * stride + ky, ox * stride + kx));
                    }
                }
                out.at(c, oy, ox) = m;
            }
        }
    }
    return out;
}

Tensor3 bilinear_resize(const Tensor3& input, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw ConfigError("bilinear_resize: target dims must be >= 1");
    const auto rows = resize_taps(input.height(), out_h);
    const auto cols = resize_taps(input.width(), out_w);
    Tensor3 out(input.channels(), out_h, out_w);
    for (std::size_t c = 0; c < input.channels(); ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            const Tap& ty = rows[y];
            for (std::size_t x = 0; x < out_w; ++x) {
                const Tap& tx = cols[x];
                const float v00 = input.at(c, ty.lo, tx.lo);
                const float v01 = input.at(c, ty.lo, tx.hi);
                const float v10 = input.at(c, ty.hi, tx.lo);
                const float v11 = input.at(c, ty.hi, tx.hi);
                const float top = (1.0f - tx.frac) * v00 + tx.frac * v01;
                const float bottom = (1.0f - tx.frac) * v10 + tx.frac * v11;
                const float v = (1.0f - ty.frac) * top + ty.frac * bottom;
                // rounding must not leave the convex hull of the four neighbors
                const float lo = std::min({v00, v01, v10, v11});
                const float hi = std::max({v00, v01, v10, v11});
                out.at(c, y, x) = std::clamp(v, lo, hi);
            }
        }
    }
    return out;
}

}  // namespace mrp
