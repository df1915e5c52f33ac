#pragma once

// Brute-force scalar reference implementations used only by the tests. They follow the
// textbook definitions directly, in double precision, and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "mrp/tensor.hpp"

namespace oracle {

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine);
    }
    std::vector<float> floats(std::size_t n, double lo = -1.0, double hi = 1.0) {
        std::vector<float> v(n);
        for (auto& x : v) x = static_cast<float>(uniform(lo, hi));
        return v;
    }
    mrp::Tensor3 tensor(std::size_t c, std::size_t h, std::size_t w, double lo = -1.0, double hi = 1.0) {
        return mrp::Tensor3(c, h, w, floats(c * h * w, lo, hi));
    }
};

// 6-deep loop: out[o][y][x] = bias[o] + sum_{i,ky,kx} w[o][i][ky][kx] * in_padded[i][y*s+ky][x*s+kx]
inline std::vector<double> conv2d(const mrp::Tensor3& in, const std::vector<float>& w,
                                  const std::vector<float>& bias, std::size_t out_c, std::size_t kh,
                                  std::size_t kw, std::size_t stride, std::size_t pad,
                                  std::size_t& out_h, std::size_t& out_w) {
    const long H = static_cast<long>(in.height()), W = static_cast<long>(in.width());
    out_h = (in.height() + 2 * pad - kh) / stride + 1;
    out_w = (in.width() + 2 * pad - kw) / stride + 1;
    std::vector<double> out(out_c * out_h * out_w);
    for (std::size_t o = 0; o < out_c; ++o)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t x = 0; x < out_w; ++x) {
                double s = bias[o];
                for (std::size_t i = 0; i < in.channels(); ++i)
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                            s += static_cast<double>(w[((o * in.channels() + i) * kh + ky) * kw + kx]) *
                                 in.at(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                out[(o * out_h + y) * out_w + x] = s;
            }
    return out;
}

inline std::vector<double> maxpool(const mrp::Tensor3& in, std::size_t k, std::size_t s,
                                   std::size_t& out_h, std::size_t& out_w) {
    out_h = (in.height() - k) / s + 1;
    out_w = (in.width() - k) / s + 1;
    std::vector<double> out;
    for (std::size_t c = 0; c < in.channels(); ++c)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t x = 0; x < out_w; ++x) {
                double m = -INFINITY;
                for (std::size_t dy = 0; dy < k; ++dy)
                    for (std::size_t dx = 0; dx < k; ++dx) m = std::max<double>(m, in.at(c, y * s + dy, x * s + dx));
                out.push_back(m);
            }
    return out;
}

// Direct evaluation of the half-pixel sampling formula.
inline double bilinear_sample(const mrp::Tensor3& in, std::size_t c, std::size_t dy, std::size_t dx,
                              std::size_t out_h, std::size_t out_w) {
    auto coord = [](std::size_t d, std::size_t n_in, std::size_t n_out) {
        double s = (static_cast<double>(d) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(n_in - 1));
    };
    const double sy = coord(dy, in.height(), out_h);
    const double sx = coord(dx, in.width(), out_w);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const auto x0 = static_cast<std::size_t>(std::floor(sx));
    const std::size_t y1 = std::min(y0 + 1, in.height() - 1);
    const std::size_t x1 = std::min(x0 + 1, in.width() - 1);
    const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * in.at(c, y0, x0) + fx * in.at(c, y0, x1)) +
           fy * ((1 - fx) * in.at(c, y1, x0) + fx * in.at(c, y1, x1));
}

// G[c1][c2] = sum_{h,w} f[h,w,c1] f[h,w,c2] / (H W)
inline std::vector<double> gram(const mrp::Tensor3& f) {
    const std::size_t C = f.channels();
    std::vector<double> g(C * C, 0.0);
    for (std::size_t c1 = 0; c1 < C; ++c1)
        for (std::size_t c2 = 0; c2 < C; ++c2) {
            double s = 0.0;
            for (std::size_t h = 0; h < f.height(); ++h)
                for (std::size_t w = 0; w < f.width(); ++w) s += static_cast<double>(f.at(c1, h, w)) * f.at(c2, h, w);
            g[c1 * C + c2] = s / static_cast<double>(f.height() * f.width());
        }
    return g;
}

inline std::vector<double> l2_normalize(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (s == 0.0) return v;
    std::vector<double> out;
    for (double x : v) out.push_back(x / std::sqrt(s));
    return out;
}

inline std::vector<double> sigmoid(const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v) out.push_back(1.0 / (1.0 + std::exp(-x)));
    return out;
}

inline std::vector<double> relu_l1(const std::vector<double>& v) {
    std::vector<double> r;
    double s = 0.0;
    for (double x : v) {
        r.push_back(x > 0 ? x : 0.0);
        s += r.back();
    }
    if (s == 0.0) return r;
    for (double& x : r) x /= s;
    return r;
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

inline double mae(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

inline double binary_ce(const std::vector<double>& a, const std::vector<double>& b) {
    const double eps = 1e-7;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double p = std::min(std::max(a[i], eps), 1 - eps);
        const double q = std::min(std::max(b[i], eps), 1 - eps);
        s += -(p * std::log(q) + (1 - p) * std::log(1 - q));
    }
    return s / static_cast<double>(a.size());
}

inline std::vector<double> as_double(const mrp::Tensor3& t) {
    return {t.values().begin(), t.values().end()};
}

// Three-case 2AFC credit.
inline double triplet_credit(double d0, double d1, double h) {
    if (d0 == d1) return 0.5;
    const bool metric_prefers_p1 = d1 < d0;
    return metric_prefers_p1 ? h : 1.0 - h;
}

}  // namespace oracle
