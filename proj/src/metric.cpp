#include "mrp/metric.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <set>

#include "mrp/error.hpp"
#include "mrp/kernels.hpp"

namespace mrp {

namespace {

// Splits on ',' or '+'.
std::vector<std::string_view> split(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find_first_of(",+", start);
        auto item = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.push_back(item);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

void check_image(const Tensor3& img, const char* which) {
    for (float v : img.values()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw InputError(std::string(which) + " has values outside [0,1]");
        }
    }
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::string to_string(const Branch& b) {
    return std::string(to_string(b.resolution)) + "-" + std::string(to_string(b.statistic));
}

Branch parse_branch(std::string_view s) {
    const auto dash = s.find('-');
    if (dash == std::string_view::npos) {
        throw UsageError("branch '" + std::string(s) + "' must look like x1-linear or x2-quadratic");
    }
    return {parse_resolution(s.substr(0, dash)), parse_statistic(s.substr(dash + 1))};
}

std::vector<Branch> parse_branches(std::string_view list) {
    std::vector<Branch> out;
    for (auto item : split(list)) out.push_back(parse_branch(item));
    if (out.empty()) throw UsageError("branch list is empty");
    return out;
}

std::string to_string(const std::vector<Branch>& branches) {
    std::string s;
    for (const auto& b : branches) {
        if (!s.empty()) s += "+";
        s += to_string(b);
    }
    return s;
}

std::vector<std::size_t> parse_blocks(std::string_view list) {
    std::vector<std::size_t> out;
    if (list.empty() || list == "all") return out;
    for (auto item : split(list)) {
        std::size_t value = 0;
        for (char ch : item) {
            if (ch < '0' || ch > '9') throw UsageError("bad block index '" + std::string(item) + "'");
            value = value * 10 + static_cast<std::size_t>(ch - '0');
        }
        if (value == 0) throw UsageError("block indices are 1-based");
        out.push_back(value);
    }
    if (out.empty()) throw UsageError("block list is empty");
    return out;
}

std::string blocks_to_string(const std::vector<std::size_t>& blocks) {
    if (blocks.empty()) return "all";
    std::string s;
    for (auto b : blocks) {
        if (!s.empty()) s += "+";
        s += std::to_string(b);
    }
    return s;
}

void MetricConfig::validate() const {
    if (branches.empty()) throw UsageError("metric needs at least one branch");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t j = i + 1; j < branches.size(); ++j) {
            if (branches[i] == branches[j]) {
                throw UsageError("duplicate branch " + to_string(branches[i]));
            }
        }
    }
    std::set<std::size_t> seen;
    for (auto b : block_mask) {
        if (b == 0) throw UsageError("block indices are 1-based");
        if (!seen.insert(b).second) throw UsageError("duplicate block " + std::to_string(b));
    }
    if (measure == DissimMeasure::ce && normalization == NormStrategy::l2) {
        throw UsageError("cross-entropy requires sigmoid or relu_l1 normalization");
    }
}

std::string MetricConfig::label() const {
    std::string s = std::string(to_string(measure)) + "/" + std::string(to_string(normalization));
    if (norm_options.l2_per_location) s += "-loc";
    return s + "/" + to_string(branches) + "/" + blocks_to_string(block_mask);
}

MetricConfig classical_config() {
    MetricConfig c;
    c.branches = {{Resolution::x1, Statistic::linear}};
    c.normalization = NormStrategy::l2;
    c.measure = DissimMeasure::mse;
    return c;
}

MetricConfig mr_config() {
    MetricConfig c;
    c.branches = {{Resolution::x1, Statistic::linear},
                  {Resolution::x1, Statistic::quadratic},
                  {Resolution::x2, Statistic::linear}};
    c.normalization = NormStrategy::sigmoid;
    c.measure = DissimMeasure::ce;
    return c;
}

MetricConfig preset_config(std::string_view name) {
    if (name == "classical") return classical_config();
    if (name == "mr") return mr_config();
    throw UsageError("unknown preset '" + std::string(name) + "' (expected classical or mr)");
}

BlockFeatures features_at(const Tensor3& image, const WeightStore& store, Resolution resolution) {
    if (resolution == Resolution::x2) {
        const Tensor3 up = bilinear_resize(image, image.height() * 2, image.width() * 2);
        return extract_blocks(preprocess(up, store), store);
    }
    return extract_blocks(preprocess(image, store), store);
}

MetricResult metric_from_features(const FeatureSource& a, const FeatureSource& b,
                                  std::size_t block_count, const MetricConfig& config) {
    config.validate();
    for (auto blk : config.block_mask) {
        if (blk > block_count) {
            throw UsageError("block " + std::to_string(blk) + " exceeds backbone block count " +
                             std::to_string(block_count));
        }
    }
    MetricResult result;
    std::vector<double> branch_distances;
    for (const auto& branch : config.branches) {
        const BlockFeatures& fa = a(branch.resolution);
        const BlockFeatures& fb = b(branch.resolution);
        Descriptor da, db;
        if (branch.statistic == Statistic::linear) {
            da = linear_features(fa, branch.resolution, config.block_mask);
            db = linear_features(fb, branch.resolution, config.block_mask);
        } else {
            da = quadratic_features(fa, branch.resolution, config.block_mask);
            db = quadratic_features(fb, branch.resolution, config.block_mask);
        }
        da = normalize(std::move(da), config.normalization, config.norm_options);
        db = normalize(std::move(db), config.normalization, config.norm_options);

        BranchResult br;
        br.branch = branch;
        for (const auto& blk : da.blocks) br.blocks.push_back(blk.origin.block);
        br.block_distances = block_dissimilarities(da, db, config.measure);
        br.distance = mean(br.block_distances);
        branch_distances.push_back(br.distance);
        result.per_branch.push_back(std::move(br));
    }
    result.distance = mean(branch_distances);
    return result;
}

MetricResult compute_metric(const Tensor3& img_a, const Tensor3& img_b, const WeightStore& store,
                            const MetricConfig& config) {
    if (!img_a.same_shape(img_b)) throw UsageError("images differ in size");
    check_image(img_a, "first image");
    check_image(img_b, "second image");
    config.validate();

    std::optional<BlockFeatures> a_cache[2];
    std::optional<BlockFeatures> b_cache[2];
    auto lazy = [&store](const Tensor3& img, std::optional<BlockFeatures>* slots) {
        return [&store, &img, slots](Resolution r) -> const BlockFeatures& {
            auto& slot = slots[r == Resolution::x1 ? 0 : 1];
            if (!slot) slot = features_at(img, store, r);
            return *slot;
        };
    };
    return metric_from_features(lazy(img_a, a_cache), lazy(img_b, b_cache), store.block_count(),
                                config);
}

MetricResult mr_perceptual(const Tensor3& img_a, const Tensor3& img_b, const WeightStore& store) {
    return compute_metric(img_a, img_b, store, mr_config());
}

std::uint64_t tensor_digest(const Tensor3& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(t.channels());
    mix(t.height());
    mix(t.width());
    for (float v : t.values()) mix(std::bit_cast<std::uint32_t>(v));
    return h;
}

const BlockFeatures& FeatureCache::get(const Tensor3& image, Resolution resolution) {
    const auto key = std::make_pair(tensor_digest(image), resolution);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    ++misses_;
    return entries_.emplace(key, features_at(image, store_, resolution)).first->second;
}

FeatureSource FeatureCache::source(const Tensor3& image) {
    return [this, &image](Resolution r) -> const BlockFeatures& { return get(image, r); };
}

}  // namespace mrp
