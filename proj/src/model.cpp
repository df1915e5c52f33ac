#include "mrp/model.hpp"

#include <string>

#include "mrp/error.hpp"
#include "mrp/kernels.hpp"

namespace mrp {

Tensor3 preprocess(const Tensor3& image, const WeightStore& store) {
    if (image.channels() != store.input_channels()) {
        throw InputError("image has " + std::to_string(image.channels()) + " channels, backbone " +
                         store.backbone() + " expects " + std::to_string(store.input_channels()));
    }
    Tensor3 out = image;
    for (std::size_t c = 0; c < out.channels(); ++c) {
        const float mean = store.mean()[c];
        const float sd = store.std_dev()[c];
        for (float& v : out.plane(c)) v = (v - mean) / sd;
    }
    return out;
}

BlockFeatures extract_blocks(const Tensor3& image, const WeightStore& store) {
    const auto& layers = store.layers();
    std::size_t last_tap = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].tap) last_tap = i;
    }

    BlockFeatures features;
    features.blocks.reserve(store.block_count());
    Tensor3 x = image;
    for (std::size_t i = 0; i <= last_tap; ++i) {
        const LayerDescriptor& layer = layers[i];
        auto too_small = [&](std::size_t kh, std::size_t kw, std::size_t pad) {
            if (kh > x.height() + 2 * pad || kw > x.width() + 2 * pad) {
                throw InputError("input too small: layer " + layer.name + " needs at least " +
                                 std::to_string(kh) + "x" + std::to_string(kw) + " but receives " +
                                 std::to_string(x.height()) + "x" + std::to_string(x.width()));
            }
        };
        switch (layer.kind) {
            case LayerKind::conv: {
                too_small(layer.weight_shape[2], layer.weight_shape[3], layer.padding);
                ConvParams p;
                p.kernel = store.param(layer.weight).values;
                p.bias = store.param(layer.bias).values;
                p.out_channels = layer.weight_shape[0];
                p.in_channels = layer.weight_shape[1];
                p.kernel_h = layer.weight_shape[2];
                p.kernel_w = layer.weight_shape[3];
                p.stride = layer.stride;
                p.padding = layer.padding;
                x = conv2d(x, p, layer.name);
                break;
            }
            case LayerKind::relu:
                relu_inplace(x);
                break;
            case LayerKind::maxpool:
                too_small(layer.pool, layer.pool, 0);
                x = maxpool2d(x, layer.pool, layer.stride, layer.name);
                break;
        }
        if (layer.tap) features.blocks.push_back(x);
    }
    return features;
}

}  // namespace mrp
