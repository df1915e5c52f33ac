#pragma once

#include "mrp/tensor.hpp"

namespace mrp {

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Luma (0.299 R + 0.587 G + 0.114 B) for 3-channel images; single-channel input is copied.
Tensor3 to_luma(const Tensor3& image);

/// Mean SSIM over all fully contained Gaussian windows of the luma images. The window
/// shrinks to the largest odd size that fits when an image is smaller than `window`.
double ssim(const Tensor3& a, const Tensor3& b, const SsimParams& params = {});

/// 1 - SSIM, the dissimilarity used for 2AFC ranking.
inline double ssim_distance(const Tensor3& a, const Tensor3& b) { return 1.0 - ssim(a, b); }

}  // namespace mrp
