#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mrp/error.hpp"
#include "mrp/eval.hpp"
#include "mrp/image_io.hpp"
#include "mrp/metric.hpp"
#include "mrp/weights.hpp"

namespace mrp::cli {

namespace {

using nlohmann::json;

struct MetricFlags {
    std::string preset;
    std::string norm;
    std::string measure;
    std::string branches;
    std::string blocks;
    bool l2_per_location = false;
};

struct RunFlags {
    std::string weights;
    std::string dataset;
    std::size_t subsample = 0;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::string format;
    std::size_t workers = 0;
};

void add_metric_flags(CLI::App* cmd, MetricFlags& m) {
    cmd->add_option("--preset", m.preset, "Named metric: classical or mr (evaluate also takes ssim)");
    cmd->add_option("--norm", m.norm, "Normalization: l2, sigmoid or relu_l1");
    cmd->add_option("--measure", m.measure, "Dissimilarity: mse, mae or ce");
    cmd->add_option("--branches", m.branches, "Branches, e.g. x1-linear,x1-quadratic,x2-linear");
    cmd->add_option("--blocks", m.blocks, "Block subset, e.g. 5 or 1,2 (default all)");
    cmd->add_flag("--l2-per-location", m.l2_per_location,
                  "L2 over channels at each location instead of the whole map");
}

MetricConfig resolve_metric(const MetricFlags& m) {
    const bool explicit_flags = !m.norm.empty() || !m.measure.empty() || !m.branches.empty();
    if (!m.preset.empty() && explicit_flags) {
        throw UsageError("--preset cannot be combined with --norm/--measure/--branches");
    }
    MetricConfig config;
    if (explicit_flags) {
        if (m.norm.empty() || m.measure.empty() || m.branches.empty()) {
            throw UsageError("explicit metrics need all of --norm, --measure and --branches");
        }
        config.normalization = parse_norm(m.norm);
        config.measure = parse_measure(m.measure);
        config.branches = parse_branches(m.branches);
    } else {
        config = preset_config(m.preset.empty() ? "mr" : m.preset);
    }
    config.block_mask = parse_blocks(m.blocks);
    config.norm_options.l2_per_location = m.l2_per_location;
    config.validate();
    return config;
}

std::size_t worker_count(std::size_t requested) {
    if (requested > 0) return requested;
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

EvalOptions eval_options(const RunFlags& r, std::ostream& err) {
    EvalOptions opt;
    if (r.subsample > 0) {
        if (!r.seed) throw UsageError("--subsample requires --seed");
        opt.subsample = Subsample{r.subsample, *r.seed};
    } else if (r.seed) {
        throw UsageError("--seed only applies together with --subsample");
    }
    opt.workers = worker_count(r.workers);
    opt.progress = &err;
    return opt;
}

void emit(const std::string& content, const RunFlags& r, std::ostream& out) {
    if (r.out_path.empty()) {
        out << content;
        return;
    }
    std::ofstream f(r.out_path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + r.out_path);
    f << content;
}

void check_format(const std::string& format) {
    if (format != "json" && format != "csv" && format != "text") {
        throw UsageError("unknown format '" + format + "' (expected json, csv or text)");
    }
}

std::string render(const EvalReport& report, const std::string& format) {
    if (format == "json") return report_json(report);
    if (format == "csv") return report_csv(report);
    return report_text(report);
}

std::string render(const std::vector<EvalReport>& reports, const std::string& format) {
    if (format == "json") return reports_json(reports);
    if (format == "csv") return reports_csv(reports);
    return reports_text(reports);
}

MetricConfig make(std::string_view norm, std::string_view measure, std::string_view branches,
                  std::string_view blocks = "all") {
    MetricConfig c;
    c.normalization = parse_norm(norm);
    c.measure = parse_measure(measure);
    c.branches = parse_branches(branches);
    c.block_mask = parse_blocks(blocks);
    return c;
}

std::vector<std::string> string_list(const json& j, const char* key, const char* fallback) {
    if (!j.contains(key)) return {fallback};
    if (j[key].is_string()) return {j[key].get<std::string>()};
    return j[key].get<std::vector<std::string>>();
}

std::string inspect_text(const WeightStore& store) {
    std::ostringstream out;
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", store.checksum());
    out << "backbone: " << store.backbone() << "\n";
    out << "checksum: " << crc << "\n";
    out << "blocks:   " << store.block_count() << "\n";
    out << "input:    " << store.input_channels() << " channels, mean [";
    for (std::size_t i = 0; i < store.mean().size(); ++i) out << (i ? ", " : "") << store.mean()[i];
    out << "], std [";
    for (std::size_t i = 0; i < store.std_dev().size(); ++i) out << (i ? ", " : "") << store.std_dev()[i];
    out << "]\nlayers:\n";
    std::size_t tap = 0;
    for (const auto& l : store.layers()) {
        out << "  " << l.name << "  " << to_string(l.kind);
        if (l.kind == LayerKind::conv) {
            out << "  weight [";
            for (std::size_t i = 0; i < l.weight_shape.size(); ++i) out << (i ? "," : "") << l.weight_shape[i];
            out << "] bias [" << l.bias_shape[0] << "] stride " << l.stride << " pad " << l.padding;
        } else if (l.kind == LayerKind::maxpool) {
            out << "  kernel " << l.pool << " stride " << l.stride;
        }
        if (l.tap) out << "  -> block " << ++tap;
        out << "\n";
    }
    return out.str();
}

std::string inspect_json(const WeightStore& store) {
    nlohmann::ordered_json j;
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", store.checksum());
    j["backbone"] = store.backbone();
    j["checksum"] = crc;
    j["blocks"] = store.block_count();
    j["input_channels"] = store.input_channels();
    j["mean"] = store.mean();
    j["std"] = store.std_dev();
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const auto& l : store.layers()) {
        nlohmann::ordered_json item;
        item["name"] = l.name;
        item["kind"] = std::string(to_string(l.kind));
        if (l.kind == LayerKind::conv) {
            item["weight_shape"] = l.weight_shape;
            item["bias_shape"] = l.bias_shape;
            item["stride"] = l.stride;
            item["padding"] = l.padding;
        } else if (l.kind == LayerKind::maxpool) {
            item["kernel"] = l.pool;
            item["stride"] = l.stride;
        }
        item["tap"] = l.tap;
        layers.push_back(item);
    }
    j["layers"] = layers;
    return j.dump(2) + "\n";
}

std::string distance_text(const MetricConfig& config, const MetricResult& r) {
    std::ostringstream out;
    out.precision(10);
    out << "metric:   " << config.label() << "\n";
    out << "distance: " << r.distance << "\n";
    for (const auto& b : r.per_branch) {
        out << "  " << to_string(b.branch) << ": " << b.distance << "  [";
        for (std::size_t i = 0; i < b.blocks.size(); ++i) {
            out << (i ? ", " : "") << "b" << b.blocks[i] << "=" << b.block_distances[i];
        }
        out << "]\n";
    }
    return out.str();
}

std::string distance_json(const MetricConfig& config, const MetricResult& r) {
    nlohmann::ordered_json j;
    j["metric"] = config.label();
    j["distance"] = r.distance;
    nlohmann::ordered_json branches = nlohmann::ordered_json::array();
    for (const auto& b : r.per_branch) {
        nlohmann::ordered_json item;
        item["branch"] = to_string(b.branch);
        item["distance"] = b.distance;
        item["blocks"] = b.blocks;
        item["block_distances"] = b.block_distances;
        branches.push_back(item);
    }
    j["branches"] = branches;
    return j.dump(2) + "\n";
}

}  // namespace

std::vector<MetricConfig> ablation_grid() {
    return {
        make("l2", "mse", "x1-linear"),
        make("sigmoid", "ce", "x1-linear"),
        make("l2", "mse", "x2-linear"),
        make("l2", "mse", "x1-linear,x2-linear"),
        make("sigmoid", "mse", "x1-linear"),
        // printed as MSE in the source table, which would duplicate the previous column
        make("sigmoid", "mae", "x1-linear"),
        make("l2", "mse", "x2-quadratic"),
        make("relu_l1", "ce", "x1-linear,x1-quadratic,x2-linear"),
        make("sigmoid", "ce", "x1-linear,x1-quadratic,x2-linear"),
    };
}

std::vector<MetricConfig> single_block_grid() {
    std::vector<MetricConfig> grid;
    for (int b = 1; b <= 5; ++b) grid.push_back(make("l2", "mse", "x1-linear", std::to_string(b)));
    grid.push_back(make("l2", "mse", "x1-linear"));
    return grid;
}

std::vector<MetricConfig> load_grid(const std::string& spec, std::ostream& err) {
    if (spec == "ablation") return ablation_grid();
    if (spec == "single-block") return single_block_grid();
    json j;
    try {
        if (!spec.empty() && spec.front() == '{') {
            j = json::parse(spec);
        } else {
            std::ifstream in(spec);
            if (!in) throw UsageError("grid spec '" + spec + "' is neither a preset nor a readable file");
            j = json::parse(in);
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("grid spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("grid spec must be a JSON object");

    std::vector<MetricConfig> candidates;
    try {
        if (j.contains("cells")) {
            for (const auto& cell : j["cells"]) {
                auto c = make(cell.value("norm", "l2"), cell.value("measure", "mse"),
                              cell.value("branches", "x1-linear"), cell.value("blocks", "all"));
                c.norm_options.l2_per_location = cell.value("l2_per_location", false);
                candidates.push_back(c);
            }
        } else {
            for (const auto& norm : string_list(j, "norm", "l2")) {
                for (const auto& measure : string_list(j, "measure", "mse")) {
                    for (const auto& branches : string_list(j, "branches", "x1-linear")) {
                        for (const auto& blocks : string_list(j, "blocks", "all")) {
                            candidates.push_back(make(norm, measure, branches, blocks));
                        }
                    }
                }
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed grid spec: ") + e.what());
    }

    std::vector<MetricConfig> grid;
    for (const auto& c : candidates) {
        try {
            c.validate();
            grid.push_back(c);
        } catch (const UsageError& e) {
            err << "notice: skipping " << c.label() << ": " << e.what() << "\n";
        }
    }
    if (grid.empty()) throw UsageError("grid spec has no valid cells");
    return grid;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deep perceptual image similarity and 2AFC evaluation"};
    app.require_subcommand(1);

    MetricFlags metric;
    RunFlags run_flags;
    std::string img_a, img_b, grid_spec;

    auto* distance = app.add_subcommand("distance", "Distance between two images");
    distance->add_option("image_a", img_a, "Reference image (PNG)")->required();
    distance->add_option("image_b", img_b, "Compared image (PNG)")->required();
    distance->add_option("--weights", run_flags.weights, "MRPW weight file")->required();
    add_metric_flags(distance, metric);
    distance->add_option("--format", run_flags.format, "text or json");

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", run_flags.dataset, "2AFC dataset root")->required();
        cmd->add_option("--weights", run_flags.weights, "MRPW weight file");
        cmd->add_option("--subsample", run_flags.subsample, "Triplets kept per category");
        cmd->add_option("--seed", run_flags.seed, "Subsampling seed");
        cmd->add_option("--out", run_flags.out_path, "Write the report here instead of stdout");
        cmd->add_option("--format", run_flags.format, "json, csv or text");
        cmd->add_option("--workers", run_flags.workers, "Worker threads (default: all cores)");
    };

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a metric against 2AFC human judgments");
    add_run_flags(evaluate_cmd);
    add_metric_flags(evaluate_cmd, metric);

    auto* ablate = app.add_subcommand("ablate", "Evaluate a grid of metric configurations");
    add_run_flags(ablate);
    ablate->add_option("--grid", grid_spec, "ablation, single-block, inline JSON or a JSON file")->required();

    auto* inspect = app.add_subcommand("inspect-weights", "Summarize an MRPW weight file");
    inspect->add_option("weights", run_flags.weights, "MRPW weight file")->required();
    inspect->add_option("--format", run_flags.format, "text or json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsage;
    }

    try {
        if (distance->parsed()) {
            const std::string format = run_flags.format.empty() ? "text" : run_flags.format;
            if (format != "text" && format != "json") throw UsageError("distance supports text or json output");
            const MetricConfig config = resolve_metric(metric);
            const WeightStore store = load_weights(run_flags.weights);
            const Tensor3 a = read_png(img_a);
            const Tensor3 b = read_png(img_b);
            const MetricResult result = compute_metric(a, b, store, config);
            out << (format == "json" ? distance_json(config, result) : distance_text(config, result));
            return kOk;
        }
        if (evaluate_cmd->parsed()) {
            const std::string format = run_flags.format.empty() ? "json" : run_flags.format;
            check_format(format);
            const bool ssim_metric = metric.preset == "ssim";
            std::optional<MetricConfig> config;
            if (ssim_metric) {
                if (!metric.norm.empty() || !metric.measure.empty() || !metric.branches.empty() ||
                    !metric.blocks.empty()) {
                    throw UsageError("the ssim preset takes no feature flags");
                }
            } else {
                config = resolve_metric(metric);
                if (run_flags.weights.empty()) throw UsageError("--weights is required for deep metrics");
            }
            const EvalOptions options = eval_options(run_flags, err);
            std::optional<WeightStore> store;
            if (config) store = load_weights(run_flags.weights);
            const auto records = load_2afc(run_flags.dataset, &err);
            const EvalReport report =
                ssim_metric ? evaluate_ssim(records, options) : evaluate(records, *store, *config, options);
            if (run_flags.out_path.empty()) {
                out << render(report, format);
            } else {
                emit(render(report, format), run_flags, out);
                out << report_text(report);
            }
            return kOk;
        }
        if (ablate->parsed()) {
            const std::string format = run_flags.format.empty() ? "json" : run_flags.format;
            check_format(format);
            if (run_flags.weights.empty()) throw UsageError("--weights is required");
            const auto grid = load_grid(grid_spec, err);
            const EvalOptions options = eval_options(run_flags, err);
            const WeightStore store = load_weights(run_flags.weights);
            const auto records = load_2afc(run_flags.dataset, &err);
            const auto reports = evaluate_grid(records, store, grid, options);
            if (run_flags.out_path.empty()) {
                out << render(reports, format);
            } else {
                emit(render(reports, format), run_flags, out);
                out << reports_text(reports);
            }
            return kOk;
        }
        if (inspect->parsed()) {
            const std::string format = run_flags.format.empty() ? "text" : run_flags.format;
            if (format != "text" && format != "json") throw UsageError("inspect-weights supports text or json output");
            const WeightStore store = load_weights(run_flags.weights);
            out << (format == "json" ? inspect_json(store) : inspect_text(store));
            return kOk;
        }
    } catch (const WeightFileError& e) {
        err << "weight file error: " << e.what() << "\n";
        return kWeightFile;
    } catch (const IngestionError& e) {
        err << "ingestion error: " << e.what() << "\n";
        return kIngestion;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kUsage;
}

}  // namespace mrp::cli
