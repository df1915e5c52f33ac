#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mrp/metric.hpp"

namespace mrp::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kIngestion = 3,
    kWeightFile = 4,
};

/// Runs the command line tool with argv[0] being the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Resolves an ablation grid: "ablation", "single-block", an inline JSON object, or a JSON file.
/// Cells that fail validation are dropped with a notice on `err`.
std::vector<MetricConfig> load_grid(const std::string& spec, std::ostream& err);

/// The nine configurations of the AlexNet ablation table, left to right.
std::vector<MetricConfig> ablation_grid();

/// Classical metric restricted to each single block 1..5, then all blocks.
std::vector<MetricConfig> single_block_grid();

}  // namespace mrp::cli
