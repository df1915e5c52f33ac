#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrp/descriptor.hpp"
#include "mrp/model.hpp"
#include "mrp/weights.hpp"

namespace mrp {

struct Branch {
    Resolution resolution = Resolution::x1;
    Statistic statistic = Statistic::linear;

    friend bool operator==(const Branch&, const Branch&) = default;
};

std::string to_string(const Branch& b);       // e.g. "x1-linear"
Branch parse_branch(std::string_view s);
std::vector<Branch> parse_branches(std::string_view list);  // separated by ',' or '+'
std::string to_string(const std::vector<Branch>& branches);  // joined with '+'

/// "all" (or empty) selects every block, otherwise 1-based indices separated by ',' or '+'.
std::vector<std::size_t> parse_blocks(std::string_view list);
std::string blocks_to_string(const std::vector<std::size_t>& blocks);

struct MetricConfig {
    std::vector<Branch> branches;
    NormStrategy normalization = NormStrategy::l2;
    DissimMeasure measure = DissimMeasure::mse;
    std::vector<std::size_t> block_mask;  // empty means all blocks
    NormOptions norm_options;

    /// Throws UsageError on empty or duplicated branches, a duplicated block index, or
    /// cross-entropy combined with a normalization that is not bounded to [0,1].
    void validate() const;
    std::string label() const;  // e.g. "mse/l2/x1-linear/all"

    friend bool operator==(const MetricConfig& a, const MetricConfig& b) {
        return a.branches == b.branches && a.normalization == b.normalization &&
               a.measure == b.measure && a.block_mask == b.block_mask &&
               a.norm_options.l2_per_location == b.norm_options.l2_per_location;
    }
};

/// Linear x1 features, L2 normalization, MSE.
MetricConfig classical_config();
/// Linear x1 + quadratic x1 + linear x2, sigmoid normalization, cross-entropy.
MetricConfig mr_config();
/// "classical" or "mr"; throws UsageError for anything else.
MetricConfig preset_config(std::string_view name);

struct BranchResult {
    Branch branch;
    std::vector<std::size_t> blocks;
    std::vector<double> block_distances;
    double distance = 0.0;
};

struct MetricResult {
    double distance = 0.0;
    std::vector<BranchResult> per_branch;
};

/// Block features of one image at the requested resolution.
using FeatureSource = std::function<const BlockFeatures&(Resolution)>;

/// Upscales (x2) the raw image when requested, then preprocesses and runs the backbone.
BlockFeatures features_at(const Tensor3& image, const WeightStore& store, Resolution resolution);

/// Shared core of every metric: descriptors per branch, normalization, dissimilarity with
/// `a` on the reference side, then unweighted means over blocks and over branches.
MetricResult metric_from_features(const FeatureSource& a, const FeatureSource& b,
                                  std::size_t block_count, const MetricConfig& config);

MetricResult compute_metric(const Tensor3& img_a, const Tensor3& img_b, const WeightStore& store,
                            const MetricConfig& config);

MetricResult mr_perceptual(const Tensor3& img_a, const Tensor3& img_b, const WeightStore& store);

std::uint64_t tensor_digest(const Tensor3& t);

/// Memoizes block features by (image digest, resolution). Not thread-safe; use one per worker.
class FeatureCache {
public:
    explicit FeatureCache(const WeightStore& store) : store_(store) {}

    const BlockFeatures& get(const Tensor3& image, Resolution resolution);
    FeatureSource source(const Tensor3& image);
    std::size_t size() const { return entries_.size(); }
    std::size_t misses() const { return misses_; }
    void clear() { entries_.clear(); }

private:
    const WeightStore& store_;
    std::map<std::pair<std::uint64_t, Resolution>, BlockFeatures> entries_;
    std::size_t misses_ = 0;
};

}  // namespace mrp
