#include "mrp/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrp/error.hpp"

namespace mrp {

namespace {

std::vector<std::size_t> select_blocks(const BlockFeatures& features,
                                       std::span<const std::size_t> blocks) {
    std::vector<std::size_t> out;
    if (blocks.empty()) {
        for (std::size_t b = 1; b <= features.size(); ++b) out.push_back(b);
        return out;
    }
    for (std::size_t b : blocks) {
        if (b < 1 || b > features.size()) {
            throw UsageError("block index " + std::to_string(b) + " outside 1.." +
                             std::to_string(features.size()));
        }
        out.push_back(b);
    }
    return out;
}

double sum_squares(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return s;
}

void scale(std::span<float> v, double norm) {
    if (norm <= 0.0) return;
    for (float& x : v) x = static_cast<float>(x / norm);
}

void l2_per_location(Tensor3& t) {
    const std::size_t plane = t.plane_size();
    auto data = t.values();
    for (std::size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < t.channels(); ++c) {
            const double v = data[c * plane + i];
            s += v * v;
        }
        const double norm = std::sqrt(s);
        if (norm <= 0.0) continue;
        for (std::size_t c = 0; c < t.channels(); ++c) {
            data[c * plane + i] = static_cast<float>(data[c * plane + i] / norm);
        }
    }
}

float sigmoid(float v) {
    constexpr float lo = std::numeric_limits<float>::denorm_min();
    const float hi = std::nextafter(1.0f, 0.0f);
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
    // stay inside the open interval after float rounding
    return std::clamp(static_cast<float>(s), lo, hi);
}

void check_compatible(const Descriptor& a, const Descriptor& b) {
    if (a.blocks.size() != b.blocks.size()) {
        throw UsageError("descriptors differ in block count (" + std::to_string(a.blocks.size()) +
                         " vs " + std::to_string(b.blocks.size()) + ")");
    }
    if (a.normalization != b.normalization) {
        throw UsageError("descriptors carry different normalizations");
    }
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        if (!(a.blocks[i].origin == b.blocks[i].origin)) {
            throw UsageError("descriptor block " + std::to_string(i) + " origins differ");
        }
        if (!a.blocks[i].values.same_shape(b.blocks[i].values)) {
            throw UsageError("descriptor block " + std::to_string(i) + " shapes differ");
        }
    }
}

void check_unit_interval(const Descriptor& d) {
    for (const auto& block : d.blocks) {
        for (float v : block.values.values()) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw UsageError("cross-entropy needs values in [0,1]; normalize with sigmoid or relu_l1");
            }
        }
    }
}

}  // namespace

std::string_view to_string(Resolution r) { return r == Resolution::x1 ? "x1" : "x2"; }
std::string_view to_string(Statistic s) { return s == Statistic::linear ? "linear" : "quadratic"; }

std::string_view to_string(NormStrategy n) {
    switch (n) {
        case NormStrategy::l2: return "l2";
        case NormStrategy::sigmoid: return "sigmoid";
        case NormStrategy::relu_l1: return "relu_l1";
    }
    return "?";
}

std::string_view to_string(DissimMeasure m) {
    switch (m) {
        case DissimMeasure::mse: return "mse";
        case DissimMeasure::mae: return "mae";
        case DissimMeasure::ce: return "ce";
    }
    return "?";
}

Resolution parse_resolution(std::string_view s) {
    if (s == "x1") return Resolution::x1;
    if (s == "x2") return Resolution::x2;
    throw UsageError("unknown resolution '" + std::string(s) + "' (expected x1 or x2)");
}

Statistic parse_statistic(std::string_view s) {
    if (s == "linear") return Statistic::linear;
    if (s == "quadratic") return Statistic::quadratic;
    throw UsageError("unknown statistic '" + std::string(s) + "' (expected linear or quadratic)");
}

NormStrategy parse_norm(std::string_view s) {
    if (s == "l2") return NormStrategy::l2;
    if (s == "sigmoid") return NormStrategy::sigmoid;
    if (s == "relu_l1") return NormStrategy::relu_l1;
    throw UsageError("unknown normalization '" + std::string(s) + "' (expected l2, sigmoid or relu_l1)");
}

DissimMeasure parse_measure(std::string_view s) {
    if (s == "mse") return DissimMeasure::mse;
    if (s == "mae") return DissimMeasure::mae;
    if (s == "ce") return DissimMeasure::ce;
    throw UsageError("unknown measure '" + std::string(s) + "' (expected mse, mae or ce)");
}

Descriptor linear_features(const BlockFeatures& features, Resolution resolution,
                           std::span<const std::size_t> blocks) {
    Descriptor d;
    for (std::size_t b : select_blocks(features, blocks)) {
        d.blocks.push_back({{b, resolution, Statistic::linear}, features.blocks[b - 1]});
    }
    return d;
}

Descriptor quadratic_features(const BlockFeatures& features, Resolution resolution,
                              std::span<const std::size_t> blocks) {
    Descriptor d;
    for (std::size_t b : select_blocks(features, blocks)) {
        d.blocks.push_back({{b, resolution, Statistic::quadratic}, gram(features.blocks[b - 1])});
    }
    return d;
}

Tensor3 gram(const Tensor3& block) {
    const std::size_t c = block.channels();
    const std::size_t n = block.plane_size();
    const Accum inv = Accum{1} / static_cast<Accum>(n);
    Tensor3 g(1, c, c);
    for (std::size_t i = 0; i < c; ++i) {
        const float* fi = block.plane(i).data();
        for (std::size_t j = i; j < c; ++j) {
            const float* fj = block.plane(j).data();
            Accum s = 0;
            for (std::size_t k = 0; k < n; ++k) s += static_cast<Accum>(fi[k]) * fj[k];
            const auto v = static_cast<float>(s * inv);
            g.at(0, i, j) = v;
            g.at(0, j, i) = v;
        }
    }
    return g;
}

Descriptor normalize(Descriptor desc, NormStrategy strategy, const NormOptions& options) {
    if (desc.normalization) {
        throw UsageError("descriptor is already normalized (" +
                         std::string(to_string(*desc.normalization)) + ")");
    }
    for (auto& block : desc.blocks) {
        auto v = block.values.values();
        switch (strategy) {
            case NormStrategy::l2:
                if (options.l2_per_location && block.origin.statistic == Statistic::linear) {
                    l2_per_location(block.values);
                } else {
                    scale(v, std::sqrt(sum_squares(v)));
                }
                break;
            case NormStrategy::sigmoid:
                for (float& x : v) x = sigmoid(x);
                break;
            case NormStrategy::relu_l1: {
                double l1 = 0.0;
                for (float& x : v) {
                    x = x > 0.0f ? x : 0.0f;
                    l1 += x;
                }
                scale(v, l1);
                break;
            }
        }
    }
    desc.normalization = strategy;
    return desc;
}

std::vector<double> block_dissimilarities(const Descriptor& a, const Descriptor& b,
                                          DissimMeasure measure) {
    check_compatible(a, b);
    if (measure == DissimMeasure::ce) {
        check_unit_interval(a);
        check_unit_interval(b);
    }
    std::vector<double> out;
    out.reserve(a.blocks.size());
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        const auto va = a.blocks[i].values.values();
        const auto vb = b.blocks[i].values.values();
        double sum = 0.0;
        switch (measure) {
            case DissimMeasure::mse:
                for (std::size_t k = 0; k < va.size(); ++k) {
                    const double d = static_cast<double>(va[k]) - vb[k];
                    sum += d * d;
                }
                break;
            case DissimMeasure::mae:
                for (std::size_t k = 0; k < va.size(); ++k) {
                    sum += std::abs(static_cast<double>(va[k]) - vb[k]);
                }
                break;
            case DissimMeasure::ce:
                for (std::size_t k = 0; k < va.size(); ++k) {
                    const double p = std::clamp<double>(va[k], kCeEpsilon, 1.0 - kCeEpsilon);
                    const double q = std::clamp<double>(vb[k], kCeEpsilon, 1.0 - kCeEpsilon);
                    sum -= p * std::log(q) + (1.0 - p) * std::log(1.0 - q);
                }
                break;
        }
        out.push_back(sum / static_cast<double>(va.size()));
    }
    return out;
}

double dissimilarity(const Descriptor& a, const Descriptor& b, DissimMeasure measure) {
    const auto per_block = block_dissimilarities(a, b, measure);
    if (per_block.empty()) throw UsageError("cannot compare empty descriptors");
    double sum = 0.0;
    for (double d : per_block) sum += d;
    return sum / static_cast<double>(per_block.size());
}

}  // namespace mrp
