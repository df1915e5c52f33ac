#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrp/metric.hpp"
#include "mrp/tensor.hpp"
#include "mrp/weights.hpp"

namespace mrp {

enum class Category { trad, cnn, superres, deblur, color, frameinterp };

inline constexpr std::array<Category, 6> kCategories = {
    Category::trad, Category::cnn, Category::superres,
    Category::deblur, Category::color, Category::frameinterp};

std::string_view to_string(Category c);  // "Trad", "CNN", ...

/// Maps dataset directory names (case-insensitive; both the short names and the
/// original "traditional" / "colorization" spellings) to a category.
std::optional<Category> category_from_name(std::string_view name);

struct TripletRecord {
    std::string id;  // "<category dir>/<stem>", relative to the dataset root
    std::filesystem::path ref_path;
    std::filesystem::path p0_path;
    std::filesystem::path p1_path;
    double judge = 0.0;  // fraction of humans preferring p1
    Category category = Category::trad;
};

/// Reads a judge sidecar: ".txt" holds one decimal, ".npy" a one-element float array.
double read_judge(const std::filesystem::path& path);

/// Loads root/<category>/{ref,p0,p1,judge}/ with matching stems, sorted by id.
/// Every offending triplet is listed in the IngestionError message. Empty categories
/// produce a line on `warnings` when provided.
std::vector<TripletRecord> load_2afc(const std::filesystem::path& root,
                                     std::ostream* warnings = nullptr);

/// Human agreement credited to a metric: judge if d1 < d0, 1 - judge if d0 < d1, 0.5 on ties.
double score_triplet(double d0, double d1, double judge);

struct Subsample {
    std::size_t count = 0;  // per category
    std::uint64_t seed = 0;
};

/// Seeded Fisher-Yates shuffle per category, keep the first `count`, return sorted by id.
std::vector<TripletRecord> subsample_records(const std::vector<TripletRecord>& records,
                                             const Subsample& subsample);

std::string dataset_digest(const std::vector<TripletRecord>& records);

struct CategoryScore {
    Category category = Category::trad;
    std::size_t count = 0;
    std::optional<double> score;  // percentage; empty when count == 0
};

struct EvalReport {
    std::string metric_label;
    std::optional<MetricConfig> metric_config;
    std::string digest;
    std::size_t total = 0;
    std::optional<Subsample> subsample;
    std::array<CategoryScore, 6> per_category;
    std::optional<double> average;  // unweighted mean over non-empty categories
};

/// Distances (d0, d1) of each candidate cell for one triplet.
using TripletScorer = std::function<std::vector<std::pair<double, double>>(
    const Tensor3& ref, const Tensor3& p0, const Tensor3& p1)>;
/// Creates one scorer per worker thread.
using ScorerFactory = std::function<TripletScorer()>;

struct EvalOptions {
    std::optional<Subsample> subsample;
    std::size_t workers = 1;
    std::ostream* progress = nullptr;
};

/// Scores every record with every cell of the scorer, in parallel over records.
/// Per-record results are reduced in record order, so reports do not depend on `workers`.
std::vector<EvalReport> evaluate_cells(const std::vector<TripletRecord>& records,
                                       const ScorerFactory& factory,
                                       const std::vector<std::string>& labels,
                                       const EvalOptions& options);

EvalReport evaluate(const std::vector<TripletRecord>& records, const WeightStore& store,
                    const MetricConfig& config, const EvalOptions& options = {});

EvalReport evaluate_ssim(const std::vector<TripletRecord>& records, const EvalOptions& options = {});

/// Evaluates every config on one shared pass over the records, caching block features per
/// (image digest, resolution) within each triplet.
std::vector<EvalReport> evaluate_grid(const std::vector<TripletRecord>& records,
                                      const WeightStore& store,
                                      const std::vector<MetricConfig>& configs,
                                      const EvalOptions& options = {});

std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);
std::string report_text(const EvalReport& report);

std::string reports_json(const std::vector<EvalReport>& reports);
std::string reports_csv(const std::vector<EvalReport>& reports);
std::string reports_text(const std::vector<EvalReport>& reports);

}  // namespace mrp
