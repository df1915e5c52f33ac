#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrp/model.hpp"
#include "mrp/tensor.hpp"

namespace mrp {

enum class Resolution { x1, x2 };
enum class Statistic { linear, quadratic };
enum class NormStrategy { l2, sigmoid, relu_l1 };
enum class DissimMeasure { mse, mae, ce };

std::string_view to_string(Resolution r);
std::string_view to_string(Statistic s);
std::string_view to_string(NormStrategy n);
std::string_view to_string(DissimMeasure m);

// Parsers accept the lowercase names produced by to_string and throw UsageError otherwise.
Resolution parse_resolution(std::string_view s);
Statistic parse_statistic(std::string_view s);
NormStrategy parse_norm(std::string_view s);
DissimMeasure parse_measure(std::string_view s);

struct BlockOrigin {
    std::size_t block = 0;  // 1-based block index in the backbone
    Resolution resolution = Resolution::x1;
    Statistic statistic = Statistic::linear;

    friend bool operator==(const BlockOrigin&, const BlockOrigin&) = default;
};

/// Linear blocks hold the feature map itself; quadratic blocks hold the C x C Gram
/// matrix stored as a 1 x C x C tensor.
struct FeatureBlock {
    BlockOrigin origin;
    Tensor3 values;
};

struct Descriptor {
    std::vector<FeatureBlock> blocks;
    std::optional<NormStrategy> normalization;
};

struct NormOptions {
    // L2 over the channel vector at each spatial location instead of the whole map.
    // Applies to linear blocks only; Gram blocks keep whole-map normalization.
    bool l2_per_location = false;
};

/// Lower bound applied to both sides before taking logarithms in the cross-entropy.
inline constexpr double kCeEpsilon = 1e-7;

/// Block subset selection: empty `blocks` means every block, otherwise 1-based indices.
Descriptor linear_features(const BlockFeatures& features, Resolution resolution = Resolution::x1,
                           std::span<const std::size_t> blocks = {});
Descriptor quadratic_features(const BlockFeatures& features, Resolution resolution = Resolution::x1,
                              std::span<const std::size_t> blocks = {});

/// G[c1,c2] = sum_{h,w} f[c1,h,w] * f[c2,h,w] / (H * W), returned as 1 x C x C.
Tensor3 gram(const Tensor3& block);

Descriptor normalize(Descriptor desc, NormStrategy strategy, const NormOptions& options = {});

/// Per-block mean of the pointwise term, one value per block. `a` is the reference side.
std::vector<double> block_dissimilarities(const Descriptor& a, const Descriptor& b,
                                          DissimMeasure measure);

/// Unweighted mean of block_dissimilarities.
double dissimilarity(const Descriptor& a, const Descriptor& b, DissimMeasure measure);

}  // namespace mrp
