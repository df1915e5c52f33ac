#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "mrp/eval.hpp"
#include "mrp/image_io.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using mrp::Tensor3;
using testing_support::data_dir;
using testing_support::scratch_dir;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mrpercep");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = mrp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double json_distance(const Run& r) { return nlohmann::json::parse(r.out)["distance"].get<double>(); }

Tensor3 box_blur(const Tensor3& img, int radius, int passes) {
    Tensor3 cur = img;
    const int h = static_cast<int>(img.height()), w = static_cast<int>(img.width());
    for (int p = 0; p < passes; ++p) {
        Tensor3 next(cur.channels(), cur.height(), cur.width());
        for (std::size_t c = 0; c < cur.channels(); ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double s = 0.0;
                    int n = 0;
                    for (int dy = -radius; dy <= radius; ++dy)
                        for (int dx = -radius; dx <= radius; ++dx) {
                            const int yy = std::clamp(y + dy, 0, h - 1), xx = std::clamp(x + dx, 0, w - 1);
                            s += cur.at(c, yy, xx);
                            ++n;
                        }
                    next.at(c, y, x) = static_cast<float>(s / n);
                }
        cur = next;
    }
    return cur;
}

Tensor3 shift_right(const Tensor3& img) {
    Tensor3 out = img;
    for (std::size_t c = 0; c < img.channels(); ++c)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 1; x < img.width(); ++x) out.at(c, y, x) = img.at(c, y, x - 1);
    return out;
}

const std::string kWeights = testing_support::alexnet_path().string();
const std::string kGolden = (data_dir() / "golden64.png").string();

/// Two triplets per category, small enough for repeated CLI runs.
std::string small_corpus() {
    static const std::string root = [] {
        const fs::path dst = scratch_dir("cli_corpus");
        for (const auto& cat : fs::directory_iterator(testing_support::mini_corpus())) {
            for (const char* sub : {"ref", "p0", "p1", "judge"}) {
                fs::create_directories(dst / cat.path().filename() / sub);
                std::vector<fs::path> files;
                for (const auto& f : fs::directory_iterator(cat.path() / sub)) files.push_back(f.path());
                std::sort(files.begin(), files.end());
                for (std::size_t i = 0; i < 2; ++i) fs::copy_file(files[i], dst / cat.path().filename() / sub / files[i].filename());
            }
        }
        return dst.string();
    }();
    return root;
}

}  // namespace

TEST(CliDistance, SameFileIsZeroUnderClassical) {
    const auto r = cli({"distance", kGolden, kGolden, "--weights", kWeights, "--preset", "classical", "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json_distance(r), 0.0);
}

TEST(CliDistance, HeavyBlurIsFartherThanOnePixelShift) {
    const fs::path dir = scratch_dir("cli_blur");
    const Tensor3 img = mrp::read_png(kGolden);
    mrp::write_png(dir / "blur.png", box_blur(img, 3, 3));
    mrp::write_png(dir / "shift.png", shift_right(img));
    const auto blur = cli({"distance", kGolden, (dir / "blur.png").string(), "--weights", kWeights, "--format", "json"});
    const auto shift = cli({"distance", kGolden, (dir / "shift.png").string(), "--weights", kWeights, "--format", "json"});
    ASSERT_EQ(blur.code, 0) << blur.err;
    ASSERT_EQ(shift.code, 0) << shift.err;
    EXPECT_GT(json_distance(blur), json_distance(shift));
}

TEST(CliDistance, UsageErrors) {
    EXPECT_EQ(cli({"distance", kGolden, kGolden, "--weights", kWeights, "--preset", "fancy"}).code, mrp::cli::kUsage);
    EXPECT_EQ(cli({"distance", kGolden, kGolden, "--weights", kWeights, "--preset", "mr", "--norm", "l2"}).code,
              mrp::cli::kUsage);
    EXPECT_EQ(cli({"distance", kGolden, kGolden, "--weights", kWeights, "--norm", "l2", "--measure", "mse"}).code,
              mrp::cli::kUsage);
    EXPECT_EQ(cli({"distance", kGolden, kGolden, "--weights", kWeights, "--norm", "l2", "--measure", "ce",
                   "--branches", "x1-linear"}).code,
              mrp::cli::kUsage);
    const fs::path dir = scratch_dir("cli_decode");
    std::ofstream(dir / "junk.png") << "junk";
    EXPECT_EQ(cli({"distance", kGolden, (dir / "junk.png").string(), "--weights", kWeights}).code, mrp::cli::kUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, mrp::cli::kUsage);
}

TEST(CliDistance, ExplicitFlagsMatchThePreset) {
    const auto preset = cli({"distance", kGolden, kGolden, "--weights", kWeights, "--preset", "classical", "--format", "json"});
    const auto flags = cli({"distance", kGolden, kGolden, "--weights", kWeights, "--norm", "l2", "--measure", "mse",
                            "--branches", "x1-linear", "--format", "json"});
    EXPECT_EQ(preset.out, flags.out);
}

TEST(CliWeights, InspectAndErrors) {
    const auto text = cli({"inspect-weights", kWeights});
    ASSERT_EQ(text.code, 0);
    EXPECT_NE(text.out.find("blocks:   5"), std::string::npos);
    const auto js = cli({"inspect-weights", kWeights, "--format", "json"});
    ASSERT_EQ(js.code, 0);
    const auto parsed = nlohmann::json::parse(js.out);
    EXPECT_EQ(parsed["blocks"], 5);
    EXPECT_EQ(parsed["backbone"], "alexnet");

    const fs::path dir = scratch_dir("cli_weights");
    std::ofstream(dir / "bad.mrpw") << "MRPX0000000000000000";
    EXPECT_EQ(cli({"inspect-weights", (dir / "bad.mrpw").string()}).code, mrp::cli::kWeightFile);
    EXPECT_EQ(cli({"distance", kGolden, kGolden, "--weights", (dir / "absent.mrpw").string()}).code,
              mrp::cli::kWeightFile);
}

TEST(CliEvaluate, IngestionErrorsExitThree) {
    const fs::path root = scratch_dir("cli_bad_dataset");
    fs::create_directories(root / "cnn" / "ref");
    std::ofstream(root / "cnn" / "ref" / "x.png") << "x";
    const auto r = cli({"evaluate", "--dataset", root.string(), "--preset", "ssim"});
    EXPECT_EQ(r.code, mrp::cli::kIngestion);
    EXPECT_NE(r.err.find("cnn/x"), std::string::npos);
}

TEST(CliEvaluate, SubsampleNeedsSeed) {
    EXPECT_EQ(cli({"evaluate", "--dataset", small_corpus(), "--preset", "ssim", "--subsample", "1"}).code,
              mrp::cli::kUsage);
    EXPECT_EQ(cli({"evaluate", "--dataset", small_corpus(), "--preset", "ssim", "--seed", "1"}).code,
              mrp::cli::kUsage);
    EXPECT_EQ(cli({"evaluate", "--dataset", small_corpus(), "--preset", "classical"}).code, mrp::cli::kUsage);
}

TEST(CliEvaluate, SubsampledRunsAreByteIdentical) {
    const fs::path dir = scratch_dir("cli_repeat");
    std::vector<std::string> base = {"evaluate", "--dataset", small_corpus(), "--weights", kWeights,
                                     "--preset", "classical", "--subsample", "1", "--seed", "11", "--workers", "2"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", (dir / "a.json").string()});
    b.insert(b.end(), {"--out", (dir / "b.json").string()});
    ASSERT_EQ(cli(a).code, 0);
    ASSERT_EQ(cli(b).code, 0);
    const std::string bytes = slurp(dir / "a.json");
    EXPECT_FALSE(bytes.empty());
    EXPECT_EQ(bytes, slurp(dir / "b.json"));
    EXPECT_EQ(nlohmann::json::parse(bytes)["dataset"]["triplets"], 6);
}

TEST(CliAblate, SingleCellGridEqualsEvaluate) {
    const auto eval = cli({"evaluate", "--dataset", small_corpus(), "--weights", kWeights, "--preset", "classical",
                           "--format", "json"});
    const auto grid = cli({"ablate", "--dataset", small_corpus(), "--weights", kWeights, "--format", "json", "--grid",
                           R"({"cells":[{"norm":"l2","measure":"mse","branches":"x1-linear"}]})"});
    ASSERT_EQ(eval.code, 0) << eval.err;
    ASSERT_EQ(grid.code, 0) << grid.err;
    const auto rows = mrp::load_2afc(small_corpus());
    const auto fresh = mrp::evaluate(rows, testing_support::alexnet(), mrp::classical_config());
    EXPECT_EQ(nlohmann::json::parse(eval.out), nlohmann::json::parse(mrp::report_json(fresh)));
    const auto cells = nlohmann::json::parse(grid.out);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0], nlohmann::json::parse(eval.out));
}

TEST(CliAblate, InvalidCellsAreSkippedWithNotice) {
    const auto r = cli({"ablate", "--dataset", small_corpus(), "--weights", kWeights, "--format", "json", "--grid",
                        R"({"norm":["l2","sigmoid"],"measure":["ce"],"branches":["x1-linear"]})"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("notice:"), std::string::npos);
    const auto parsed = nlohmann::json::parse(r.out);
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_EQ(parsed[0]["metric"]["label"], "ce/sigmoid/x1-linear/all");
}

TEST(CliAblate, BuiltInGrids) {
    const auto t3 = mrp::cli::ablation_grid();
    ASSERT_EQ(t3.size(), 9u);
    EXPECT_EQ(t3.front(), mrp::classical_config());
    EXPECT_EQ(t3.back(), mrp::mr_config());
    for (std::size_t i = 0; i < t3.size(); ++i)
        for (std::size_t j = i + 1; j < t3.size(); ++j) EXPECT_FALSE(t3[i] == t3[j]) << i << " " << j;
    const auto t5 = mrp::cli::single_block_grid();
    ASSERT_EQ(t5.size(), 6u);
    for (std::size_t b = 0; b < 5; ++b) EXPECT_EQ(t5[b].block_mask, std::vector<std::size_t>{b + 1});
    EXPECT_TRUE(t5[5].block_mask.empty());
    std::ostringstream err;
    EXPECT_EQ(mrp::cli::load_grid("ablation", err).size(), 9u);
}
