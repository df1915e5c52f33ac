#pragma once

#include <vector>

#include "mrp/tensor.hpp"
#include "mrp/weights.hpp"

namespace mrp {

/// Feature maps tapped at each block output, shallow to deep.
struct BlockFeatures {
    std::vector<Tensor3> blocks;

    std::size_t size() const { return blocks.size(); }
};

/// Per-channel standardization (v - mean_c) / std_c with the constants stored in `store`.
Tensor3 preprocess(const Tensor3& image, const WeightStore& store);

/// Runs the manifest layers in order over an already preprocessed image and collects
/// the output of every tapped layer. Layers after the last tap are not evaluated.
BlockFeatures extract_blocks(const Tensor3& image, const WeightStore& store);

}  // namespace mrp
