#include "mrp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mrp/error.hpp"
#include "mrp/image_io.hpp"
#include "mrp/ssim.hpp"

namespace mrp {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

double parse_npy_scalar(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 10 || std::memcmp(bytes.data(), "\x93NUMPY", 6) != 0) {
        throw IngestionError(path.string() + ": not a .npy file");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) |
                     (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        offset = 10;
    } else {
        if (bytes.size() < 12) throw IngestionError(path.string() + ": truncated .npy header");
        for (int i = 3; i >= 0; --i) {
            header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + static_cast<std::size_t>(i)]);
        }
        offset = 12;
    }
    if (bytes.size() < offset + header_len) throw IngestionError(path.string() + ": truncated .npy header");
    const std::string header(bytes.data() + offset, header_len);
    const std::size_t data_off = offset + header_len;

    const auto descr_pos = header.find("'descr'");
    if (descr_pos == std::string::npos) throw IngestionError(path.string() + ": .npy header lacks descr");
    const auto q1 = header.find('\'', descr_pos + 7);
    const auto q2 = header.find('\'', q1 + 1);
    const std::string descr = header.substr(q1 + 1, q2 - q1 - 1);
    const std::size_t payload = bytes.size() - data_off;
    if (descr == "<f4") {
        if (payload != 4) throw IngestionError(path.string() + ": expected one float32 judge value");
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i) {
            bits = (bits << 8) | static_cast<unsigned char>(bytes[data_off + static_cast<std::size_t>(i)]);
        }
        return std::bit_cast<float>(bits);
    }
    if (descr == "<f8") {
        if (payload != 8) throw IngestionError(path.string() + ": expected one float64 judge value");
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | static_cast<unsigned char>(bytes[data_off + static_cast<std::size_t>(i)]);
        }
        return std::bit_cast<double>(bits);
    }
    throw IngestionError(path.string() + ": unsupported .npy dtype " + descr);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string pad_right(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

std::string pad_left(std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
}

std::string score_or_na(const std::optional<double>& v) { return v ? fixed2(*v) : "NA"; }

nlohmann::ordered_json report_to_json(const EvalReport& r) {
    using nlohmann::ordered_json;
    ordered_json metric;
    metric["label"] = r.metric_label;
    if (r.metric_config) {
        const auto& c = *r.metric_config;
        ordered_json branches = ordered_json::array();
        for (const auto& b : c.branches) branches.push_back(to_string(b));
        metric["branches"] = branches;
        metric["normalization"] = std::string(to_string(c.normalization));
        metric["l2_per_location"] = c.norm_options.l2_per_location;
        metric["measure"] = std::string(to_string(c.measure));
        metric["blocks"] = blocks_to_string(c.block_mask);
    }
    ordered_json dataset;
    dataset["digest"] = r.digest;
    dataset["triplets"] = r.total;
    if (r.subsample) {
        dataset["subsample"] = {{"count", r.subsample->count}, {"seed", r.subsample->seed}};
    } else {
        dataset["subsample"] = nullptr;
    }
    ordered_json cats = ordered_json::array();
    for (const auto& c : r.per_category) {
        ordered_json item;
        item["name"] = std::string(to_string(c.category));
        item["count"] = c.count;
        if (c.score) {
            item["score"] = *c.score;
        } else {
            item["score"] = nullptr;
        }
        cats.push_back(item);
    }
    ordered_json out;
    out["metric"] = metric;
    out["dataset"] = dataset;
    out["categories"] = cats;
    if (r.average) {
        out["average"] = *r.average;
    } else {
        out["average"] = nullptr;
    }
    return out;
}

}  // namespace

std::string_view to_string(Category c) {
    switch (c) {
        case Category::trad: return "Trad";
        case Category::cnn: return "CNN";
        case Category::superres: return "SuperRes";
        case Category::deblur: return "Deblur";
        case Category::color: return "Color";
        case Category::frameinterp: return "FrameInterp";
    }
    return "?";
}

std::optional<Category> category_from_name(std::string_view name) {
    const std::string n = lower(name);
    if (n == "trad" || n == "traditional") return Category::trad;
    if (n == "cnn") return Category::cnn;
    if (n == "superres") return Category::superres;
    if (n == "deblur") return Category::deblur;
    if (n == "color" || n == "colorization") return Category::color;
    if (n == "frameinterp") return Category::frameinterp;
    return std::nullopt;
}

double read_judge(const fs::path& path) {
    const std::string ext = lower(path.extension().string());
    double value = 0.0;
    if (ext == ".npy") {
        value = parse_npy_scalar(path);
    } else if (ext == ".txt") {
        std::ifstream in(path);
        if (!in) throw IngestionError("cannot open " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::istringstream ss(text);
        ss.imbue(std::locale::classic());
        std::string rest;
        if (!(ss >> value) || (ss >> rest)) {
            throw IngestionError(path.string() + ": expected a single decimal judge value");
        }
    } else {
        throw IngestionError(path.string() + ": unknown judge file type");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
        throw IngestionError(path.string() + ": judge " + std::to_string(value) + " outside [0,1]");
    }
    return value;
}

std::vector<TripletRecord> load_2afc(const fs::path& root, std::ostream* warnings) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IngestionError("dataset root " + root.string() + " is not a directory");

    std::vector<TripletRecord> records;
    std::vector<std::string> offenders;
    std::array<std::size_t, 6> per_cat{};

    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const std::string dir_name = dir.filename().string();
        const auto category = category_from_name(dir_name);
        if (!category) {
            if (warnings) *warnings << "warning: ignoring unknown category directory " << dir_name << "\n";
            continue;
        }
        const fs::path ref_dir = dir / "ref";
        if (!fs::is_directory(ref_dir)) {
            offenders.push_back(dir_name + ": missing ref/ directory");
            continue;
        }
        std::vector<fs::path> refs;
        for (const auto& f : fs::directory_iterator(ref_dir)) {
            if (f.is_regular_file() && lower(f.path().extension().string()) == ".png") refs.push_back(f.path());
        }
        std::sort(refs.begin(), refs.end());
        for (const auto& ref : refs) {
            const std::string stem = ref.stem().string();
            TripletRecord rec;
            rec.id = dir_name + "/" + stem;
            rec.category = *category;
            rec.ref_path = ref;
            rec.p0_path = dir / "p0" / (stem + ".png");
            rec.p1_path = dir / "p1" / (stem + ".png");
            std::vector<std::string> problems;
            if (!fs::is_regular_file(rec.p0_path)) problems.push_back("missing p0 image");
            if (!fs::is_regular_file(rec.p1_path)) problems.push_back("missing p1 image");
            fs::path judge = dir / "judge" / (stem + ".npy");
            if (!fs::is_regular_file(judge)) judge = dir / "judge" / (stem + ".txt");
            if (!fs::is_regular_file(judge)) {
                problems.push_back("missing judge file");
            } else {
                try {
                    rec.judge = read_judge(judge);
                } catch (const IngestionError& e) {
                    problems.push_back(e.what());
                }
            }
            if (problems.empty()) {
                try {
                    const auto s0 = png_size(rec.ref_path);
                    const auto s1 = png_size(rec.p0_path);
                    const auto s2 = png_size(rec.p1_path);
                    if (s0.height != s1.height || s0.width != s1.width || s0.height != s2.height ||
                        s0.width != s2.width) {
                        problems.push_back("images differ in size");
                    }
                } catch (const InputError& e) {
                    problems.push_back(e.what());
                }
            }
            if (!problems.empty()) {
                std::string msg = rec.id + ":";
                for (const auto& p : problems) msg += " " + p + ";";
                offenders.push_back(msg);
                continue;
            }
            ++per_cat[static_cast<std::size_t>(rec.category)];
            records.push_back(std::move(rec));
        }
    }
    if (!offenders.empty()) {
        std::string msg = std::to_string(offenders.size()) + " invalid triplet(s) under " + root.string();
        const std::size_t shown = std::min<std::size_t>(offenders.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + offenders[i];
        if (shown < offenders.size()) msg += "\n  ...";
        throw IngestionError(msg);
    }
    if (warnings) {
        for (auto c : kCategories) {
            if (per_cat[static_cast<std::size_t>(c)] == 0) {
                *warnings << "warning: category " << to_string(c) << " has no triplets\n";
            }
        }
    }
    std::sort(records.begin(), records.end(),
              [](const TripletRecord& a, const TripletRecord& b) { return a.id < b.id; });
    return records;
}

double score_triplet(double d0, double d1, double judge) {
    if (d1 < d0) return judge;
    if (d0 < d1) return 1.0 - judge;
    return 0.5;
}

std::vector<TripletRecord> subsample_records(const std::vector<TripletRecord>& records,
                                             const Subsample& subsample) {
    std::array<std::vector<TripletRecord>, 6> groups;
    for (const auto& r : records) groups[static_cast<std::size_t>(r.category)].push_back(r);
    std::vector<TripletRecord> out;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto& g = groups[c];
        std::mt19937_64 rng(subsample.seed + c);
        for (std::size_t i = g.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(g[i - 1], g[j]);
        }
        const std::size_t keep = std::min(subsample.count, g.size());
        out.insert(out.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    std::sort(out.begin(), out.end(),
              [](const TripletRecord& a, const TripletRecord& b) { return a.id < b.id; });
    return out;
}

std::string dataset_digest(const std::vector<TripletRecord>& records) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : records) {
        h = fnv1a(h, r.id);
        h = fnv1a(h, std::string_view("\0", 1));
        const auto bits = std::bit_cast<std::uint64_t>(r.judge);
        char raw[8];
        for (int i = 0; i < 8; ++i) raw[i] = static_cast<char>(bits >> (8 * i));
        h = fnv1a(h, std::string_view(raw, 8));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<EvalReport> evaluate_cells(const std::vector<TripletRecord>& all_records,
                                       const ScorerFactory& factory,
                                       const std::vector<std::string>& labels,
                                       const EvalOptions& options) {
    const std::vector<TripletRecord> records =
        options.subsample ? subsample_records(all_records, *options.subsample) : all_records;
    const std::size_t cells = labels.size();
    const std::size_t n = records.size();
    std::vector<double> scores(n * cells, 0.0);

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t error_index = n;
    std::exception_ptr error;

    auto work = [&]() {
        TripletScorer scorer;
        try {
            scorer = factory();
        } catch (...) {
            std::lock_guard lock(mutex);
            if (!error) error = std::current_exception();
            failed = true;
            return;
        }
        while (!failed) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            const auto& rec = records[i];
            try {
                Tensor3 ref, p0, p1;
                try {
                    ref = read_png(rec.ref_path);
                    p0 = read_png(rec.p0_path);
                    p1 = read_png(rec.p1_path);
                } catch (const InputError& e) {
                    throw IngestionError("triplet " + rec.id + ": " + e.what());
                }
                const auto distances = scorer(ref, p0, p1);
                if (distances.size() != cells) throw UsageError("scorer returned wrong cell count");
                for (std::size_t c = 0; c < cells; ++c) {
                    scores[i * cells + c] = score_triplet(distances[c].first, distances[c].second, rec.judge);
                }
            } catch (const IngestionError&) {
                std::lock_guard lock(mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                failed = true;
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::make_exception_ptr(Error("triplet " + rec.id + ": " + e.what()));
                }
                failed = true;
            }
            const std::size_t finished = done.fetch_add(1) + 1;
            if (options.progress && (finished % 500 == 0 || finished == n)) {
                std::lock_guard lock(mutex);
                *options.progress << "\r" << finished << "/" << n << " triplets" << std::flush;
                if (finished == n) *options.progress << "\n";
            }
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(n, 1)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);

    const std::string digest = dataset_digest(records);
    std::vector<EvalReport> reports(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        EvalReport& r = reports[c];
        r.metric_label = labels[c];
        r.digest = digest;
        r.total = n;
        r.subsample = options.subsample;
        std::array<double, 6> sums{};
        std::array<std::size_t, 6> counts{};
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(records[i].category);
            sums[k] += scores[i * cells + c];
            ++counts[k];
        }
        double avg_sum = 0.0;
        std::size_t avg_n = 0;
        for (std::size_t k = 0; k < 6; ++k) {
            r.per_category[k].category = kCategories[k];
            r.per_category[k].count = counts[k];
            if (counts[k] > 0) {
                const double score = sums[k] / static_cast<double>(counts[k]) * 100.0;
                r.per_category[k].score = score;
                avg_sum += score;
                ++avg_n;
            }
        }
        if (avg_n > 0) r.average = avg_sum / static_cast<double>(avg_n);
    }
    return reports;
}

EvalReport evaluate(const std::vector<TripletRecord>& records, const WeightStore& store,
                    const MetricConfig& config, const EvalOptions& options) {
    config.validate();
    ScorerFactory factory = [&store, &config]() -> TripletScorer {
        return [&store, &config](const Tensor3& ref, const Tensor3& p0, const Tensor3& p1) {
            const double d0 = compute_metric(ref, p0, store, config).distance;
            const double d1 = compute_metric(ref, p1, store, config).distance;
            return std::vector<std::pair<double, double>>{{d0, d1}};
        };
    };
    auto reports = evaluate_cells(records, factory, {config.label()}, options);
    reports[0].metric_config = config;
    return reports[0];
}

EvalReport evaluate_ssim(const std::vector<TripletRecord>& records, const EvalOptions& options) {
    ScorerFactory factory = []() -> TripletScorer {
        return [](const Tensor3& ref, const Tensor3& p0, const Tensor3& p1) {
            return std::vector<std::pair<double, double>>{{ssim_distance(ref, p0), ssim_distance(ref, p1)}};
        };
    };
    return evaluate_cells(records, factory, {"ssim"}, options)[0];
}

std::vector<EvalReport> evaluate_grid(const std::vector<TripletRecord>& records,
                                      const WeightStore& store,
                                      const std::vector<MetricConfig>& configs,
                                      const EvalOptions& options) {
    std::vector<std::string> labels;
    for (const auto& c : configs) {
        c.validate();
        labels.push_back(c.label());
    }
    ScorerFactory factory = [&store, &configs]() -> TripletScorer {
        auto cache = std::make_shared<FeatureCache>(store);
        return [cache, &store, &configs](const Tensor3& ref, const Tensor3& p0, const Tensor3& p1) {
            if (!ref.same_shape(p0) || !ref.same_shape(p1)) throw InputError("images differ in size");
            cache->clear();
            std::vector<std::pair<double, double>> out;
            for (const auto& config : configs) {
                const double d0 = metric_from_features(cache->source(ref), cache->source(p0),
                                                       store.block_count(), config).distance;
                const double d1 = metric_from_features(cache->source(ref), cache->source(p1),
                                                       store.block_count(), config).distance;
                out.emplace_back(d0, d1);
            }
            return out;
        };
    };
    auto reports = evaluate_cells(records, factory, labels, options);
    for (std::size_t i = 0; i < configs.size(); ++i) reports[i].metric_config = configs[i];
    return reports;
}

std::string report_json(const EvalReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::string reports_json(const std::vector<EvalReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    return arr.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << pad_right("category", 12) << "," << pad_left("score", 8) << "," << pad_left("count", 8) << "\n";
    for (const auto& c : report.per_category) {
        out << pad_right(std::string(to_string(c.category)), 12) << "," << pad_left(score_or_na(c.score), 8)
            << "," << pad_left(std::to_string(c.count), 8) << "\n";
    }
    out << pad_right("AVERAGE", 12) << "," << pad_left(score_or_na(report.average), 8) << ","
        << pad_left(std::to_string(report.total), 8) << "\n";
    return out.str();
}

std::string report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "metric:  " << report.metric_label << "\n";
    out << "dataset: " << report.total << " triplets, digest " << report.digest << "\n";
    out << pad_right("Category", 12) << pad_left("Score", 8) << pad_left("Count", 8) << "\n";
    for (const auto& c : report.per_category) {
        out << pad_right(std::string(to_string(c.category)), 12) << pad_left(score_or_na(c.score), 8)
            << pad_left(std::to_string(c.count), 8) << "\n";
    }
    out << pad_right("AVERAGE", 12) << pad_left(score_or_na(report.average), 8)
        << pad_left(std::to_string(report.total), 8) << "\n";
    return out.str();
}

namespace {

std::string grid_table(const std::vector<EvalReport>& reports, bool csv) {
    std::size_t label_w = 6;
    for (const auto& r : reports) label_w = std::max(label_w, r.metric_label.size());
    const std::string sep = csv ? "," : "  ";
    std::ostringstream out;
    out << pad_right("metric", label_w);
    for (auto c : kCategories) out << sep << pad_left(std::string(to_string(c)), 11);
    out << sep << pad_left("AVERAGE", 8) << "\n";
    for (const auto& r : reports) {
        out << pad_right(r.metric_label, label_w);
        for (const auto& c : r.per_category) out << sep << pad_left(score_or_na(c.score), 11);
        out << sep << pad_left(score_or_na(r.average), 8) << "\n";
    }
    return out.str();
}

}  // namespace

std::string reports_csv(const std::vector<EvalReport>& reports) { return grid_table(reports, true); }
std::string reports_text(const std::vector<EvalReport>& reports) { return grid_table(reports, false); }

}  // namespace mrp
