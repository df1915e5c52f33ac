#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "json.hpp"
#include "mrp/error.hpp"
#include "mrp/kernels.hpp"
#include "mrp/model.hpp"
#include "mrp/weights.hpp"
#include "test_helpers.hpp"

using namespace testing_support;
using mrp::MrpwEntry;
using mrp::Tensor3;

namespace {

std::string one_conv_manifest(std::vector<std::uint32_t> weight_shape = {1, 1, 1, 1}) {
    nlohmann::json m;
    m["backbone"] = "tiny";
    m["input_channels"] = 1;
    m["preprocess"] = {{"mean", {0.0}}, {"std", {1.0}}};
    m["layers"] = {{{"name", "c0"}, {"kind", "conv"}, {"weight", "c0.w"}, {"bias", "c0.b"},
                    {"weight_shape", weight_shape}, {"bias_shape", {1}}, {"stride", 1}, {"padding", 0},
                    {"tap", true}}};
    return m.dump();
}

std::vector<MrpwEntry> one_conv_entries(float w = 2.0f, float b = 0.5f) {
    return {{"c0.w", {{1, 1, 1, 1}, {w}}}, {"c0.b", {{1}, {b}}}};
}

std::filesystem::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    const auto path = scratch_dir("weights") / name;
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                static_cast<std::streamsize>(bytes.size()));
    return path;
}

double max_abs_delta(const Tensor3& a, const Tensor3& b) {
    EXPECT_TRUE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max<double>(m, std::fabs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace

TEST(Mrpw, HeaderLayoutIsBitExact) {
    const std::string manifest = one_conv_manifest();
    const auto bytes = mrp::serialize_mrpw(manifest, one_conv_entries());
    ASSERT_GE(bytes.size(), 20u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MRPW");
    auto u32 = [&](std::size_t off) {
        return std::uint32_t(bytes[off]) | std::uint32_t(bytes[off + 1]) << 8 | std::uint32_t(bytes[off + 2]) << 16 |
               std::uint32_t(bytes[off + 3]) << 24;
    };
    EXPECT_EQ(u32(4), 1u);
    EXPECT_EQ(u32(8), mrp::crc32(std::span(bytes).subspan(20)));
    EXPECT_EQ(u32(12), 2u);
    EXPECT_EQ(u32(16), manifest.size());
    // first entry directly after the manifest: name length, name, rank, dims, data
    const std::size_t e = 20 + manifest.size();
    EXPECT_EQ(u32(e), 4u);
    EXPECT_EQ(std::string(bytes.begin() + long(e) + 4, bytes.begin() + long(e) + 8), "c0.w");
    EXPECT_EQ(u32(e + 8), 4u);
    EXPECT_EQ(u32(e + 28), 0x40000000u);  // 2.0f
    // total size: header + manifest + (4+4+4+16+4) + (4+4+4+4+4)
    EXPECT_EQ(bytes.size(), 20 + manifest.size() + 32 + 20);
}

TEST(Mrpw, Crc32KnownValue) {
    const std::string s = "123456789";
    EXPECT_EQ(mrp::crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), 0xCBF43926u);
}

TEST(LoadWeights, SmallestValidFile) {
    const auto path = write_bytes("tiny.mrpw", mrp::serialize_mrpw(one_conv_manifest(), one_conv_entries()));
    const auto store = mrp::load_weights(path);
    EXPECT_EQ(store.block_count(), 1u);
    EXPECT_EQ(store.backbone(), "tiny");
    const auto blocks = mrp::extract_blocks(Tensor3(1, 2, 2, 1.0f), store);
    ASSERT_EQ(blocks.size(), 1u);
    for (float v : blocks.blocks[0].values()) EXPECT_EQ(v, 2.5f);
    // loads are read-only and repeatable
    EXPECT_EQ(mrp::load_weights(path).checksum(), store.checksum());
}

TEST(LoadWeights, RejectsBadMagicAndVersion) {
    auto bytes = mrp::serialize_mrpw(one_conv_manifest(), one_conv_entries());
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(mrp::load_weights(write_bytes("magic.mrpw", bad_magic)), mrp::FormatError);
    auto bad_version = bytes;
    bad_version[4] = 2;
    EXPECT_THROW(mrp::load_weights(write_bytes("version.mrpw", bad_version)), mrp::FormatError);
    EXPECT_THROW(mrp::load_weights(write_bytes("short.mrpw", {'M', 'R'})), mrp::FormatError);
    EXPECT_THROW(mrp::load_weights(scratch_dir("missing") / "nope.mrpw"), mrp::FormatError);
}

TEST(LoadWeights, DetectsPayloadCorruption) {
    auto bytes = mrp::serialize_mrpw(one_conv_manifest(), one_conv_entries());
    bytes.back() ^= 0x01;
    EXPECT_THROW(mrp::load_weights(write_bytes("flip.mrpw", bytes)), mrp::CorruptionError);
}

TEST(LoadWeights, ShapeMismatchNamesEntry) {
    const auto bytes = mrp::serialize_mrpw(one_conv_manifest({1, 1, 3, 3}), one_conv_entries());
    try {
        mrp::load_weights(write_bytes("shape.mrpw", bytes));
        FAIL() << "expected ManifestError";
    } catch (const mrp::ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("c0.w"), std::string::npos) << e.what();
    }
}

TEST(LoadWeights, ManifestValidation) {
    auto entries = one_conv_entries();
    entries.pop_back();
    EXPECT_THROW(mrp::load_weights(write_bytes("missing_bias.mrpw", mrp::serialize_mrpw(one_conv_manifest(), entries))),
                 mrp::ManifestError);

    auto m = nlohmann::json::parse(one_conv_manifest());
    m["layers"][0]["tap"] = false;
    EXPECT_THROW(mrp::load_weights(write_bytes("notap.mrpw", mrp::serialize_mrpw(m.dump(), one_conv_entries()))),
                 mrp::ManifestError);

    m = nlohmann::json::parse(one_conv_manifest());
    m["layers"][0]["kind"] = "attention";
    EXPECT_THROW(mrp::load_weights(write_bytes("kind.mrpw", mrp::serialize_mrpw(m.dump(), one_conv_entries()))),
                 mrp::ManifestError);

    EXPECT_THROW(mrp::load_weights(write_bytes("json.mrpw", mrp::serialize_mrpw("{not json", one_conv_entries()))),
                 mrp::FormatError);

    auto nan_entries = one_conv_entries(std::nanf(""));
    EXPECT_THROW(mrp::load_weights(write_bytes("nan.mrpw", mrp::serialize_mrpw(one_conv_manifest(), nan_entries))),
                 mrp::CorruptionError);
}

TEST(LoadWeights, AlexNetHasFiveBlocks) {
    const auto& store = alexnet();
    EXPECT_EQ(store.block_count(), 5u);
    EXPECT_EQ(store.input_channels(), 3u);
    EXPECT_EQ(store.mean().size(), 3u);
}

TEST(LoadWeights, SqueezeNetHasSevenBlocks) {
    EXPECT_EQ(mrp::load_weights(squeezenet_path()).block_count(), 7u);
}

TEST(Preprocess, CentersAndScales) {
    const auto& store = alexnet();
    Tensor3 img(3, 4, 4);
    for (std::size_t c = 0; c < 3; ++c)
        for (float& v : img.plane(c)) v = store.mean()[c];
    const Tensor3 centered = mrp::preprocess(img, store);
    for (float v : centered.values()) EXPECT_EQ(v, 0.0f);

    const auto tiny = mrp::load_weights(
        write_bytes("tiny2.mrpw", mrp::serialize_mrpw(one_conv_manifest(), one_conv_entries())));
    const Tensor3 gray(1, 5, 5, 0.3f);
    EXPECT_EQ(mrp::preprocess(gray, tiny), gray);

    const Tensor3 r = random_image(11, 6, 7);
    const Tensor3 p = mrp::preprocess(r, store);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < r.plane_size(); ++i) {
            const double expect = (double(r.plane(c)[i]) - store.mean()[c]) / store.std_dev()[c];
            EXPECT_NEAR(p.plane(c)[i], expect, 1e-6);
        }

    EXPECT_THROW(mrp::preprocess(Tensor3(1, 4, 4), store), mrp::InputError);
}

TEST(ExtractBlocks, AlexNetShapesFollowManifest) {
    const auto& store = alexnet();
    const auto feats = mrp::extract_blocks(mrp::preprocess(pattern_image(1), store), store);
    ASSERT_EQ(feats.size(), store.block_count());
    std::vector<std::size_t> tapped_channels;
    std::size_t channels = store.input_channels();
    for (const auto& l : store.layers()) {
        if (l.kind == mrp::LayerKind::conv) channels = l.weight_shape[0];
        if (l.tap) tapped_channels.push_back(channels);
    }
    for (std::size_t b = 0; b < feats.size(); ++b) {
        EXPECT_EQ(feats.blocks[b].channels(), tapped_channels[b]);
        if (b > 0) {
            EXPECT_LE(feats.blocks[b].height(), feats.blocks[b - 1].height());
            EXPECT_LE(feats.blocks[b].width(), feats.blocks[b - 1].width());
        }
    }
    EXPECT_EQ(feats.blocks[0].height(), 15u);
    EXPECT_EQ(feats.blocks[4].height(), 3u);
}

TEST(ExtractBlocks, DeterministicAndThreadSafe) {
    const auto& store = alexnet();
    const Tensor3 img = mrp::preprocess(pattern_image(2), store);
    const auto first = mrp::extract_blocks(img, store);
    const auto second = mrp::extract_blocks(img, store);
    for (std::size_t b = 0; b < first.size(); ++b) EXPECT_EQ(first.blocks[b], second.blocks[b]);

    std::vector<Tensor3> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(mrp::preprocess(pattern_image(100 + i), store));
    std::vector<mrp::BlockFeatures> sequential, parallel(inputs.size());
    for (const auto& in : inputs) sequential.push_back(mrp::extract_blocks(in, store));
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        threads.emplace_back([&, i] { parallel[i] = mrp::extract_blocks(inputs[i], store); });
    }
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t b = 0; b < sequential[i].size(); ++b) EXPECT_EQ(sequential[i].blocks[b], parallel[i].blocks[b]);
}

TEST(ExtractBlocks, InputTooSmallNamesLayer) {
    const auto& store = alexnet();
    try {
        mrp::extract_blocks(Tensor3(3, 16, 16), store);
        FAIL() << "expected InputError";
    } catch (const mrp::InputError& e) {
        EXPECT_NE(std::string(e.what()).find("features."), std::string::npos) << e.what();
    }
}

TEST(ExtractBlocks, GoldenActivationsAt128) {
    const auto& store = alexnet();
    const auto golden = mrp::read_mrpw(data_dir() / "alexnet_seeded.golden128.mrpw");
    const Tensor3 input = tensor_from(golden.find("golden/input")->array);
    const auto feats = mrp::extract_blocks(mrp::preprocess(input, store), store);
    for (std::size_t b = 0; b < feats.size(); ++b) {
        const auto* ref = golden.find("golden/block" + std::to_string(b + 1));
        ASSERT_NE(ref, nullptr);
        EXPECT_LE(max_abs_delta(feats.blocks[b], tensor_from(ref->array)), 1e-4) << "block " << b + 1;
    }
    // the stored x2 input is the framework's bilinear upscale of the 64x64 golden image
    const auto g64 = mrp::read_mrpw(data_dir() / "alexnet_seeded.golden64.mrpw");
    const Tensor3 up = mrp::bilinear_resize(tensor_from(g64.find("golden/input")->array), 128, 128);
    EXPECT_LE(max_abs_delta(up, input), 1e-6);
}

TEST(ExtractBlocks, SqueezeNetGoldenActivations) {
    const auto store = mrp::load_weights(squeezenet_path());
    const auto golden = mrp::read_mrpw(data_dir() / "squeezenet_seeded.golden64.mrpw");
    const Tensor3 input = tensor_from(golden.find("golden/input")->array);
    const auto feats = mrp::extract_blocks(mrp::preprocess(input, store), store);
    ASSERT_EQ(feats.size(), 7u);
    for (std::size_t b = 0; b < feats.size(); ++b) {
        const auto* ref = golden.find("golden/block" + std::to_string(b + 1));
        ASSERT_NE(ref, nullptr);
        EXPECT_LE(max_abs_delta(feats.blocks[b], tensor_from(ref->array)), 1e-4) << "block " << b + 1;
    }
}
