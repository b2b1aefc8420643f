#pragma once

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lmm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNonConvergence = 2, kFitFailure = 3 };

// Fully resolved settings of one command; recorded in every JSON output so a run can be replayed.
struct RunConfig {
    std::string command;
    std::vector<std::string> inputs;
    std::string out = ".";
    double kernel_a = 1.0;
    double kernel_b = 1.5;
    std::string weights = "equal";
    std::optional<double> tol;  // shooting tolerance (match) or averaging epsilon (average, detect)
    int max_iter = 0;           // shooting iterations (match) or outer iterations (average, detect); 0: default
    int steps = 20;
    std::uint64_t seed = 0;
    int chains = 4;
    int burn_in = 5000;
    int draws = 20000;
    double threshold = 0.5;
    unsigned threads = 0;  // worker cap; results do not depend on it
    // synth
    double alpha = 0.0;
    int members = 20;
    int landmarks = 20;
    int planted_landmark = 0;  // > 0 writes a control/case pair with a planted shift
    double shift_sds = 3.0;
};

// 500 for match, 100 for the averaging commands.
int default_max_iter(const std::string &command);

nlohmann::ordered_json to_json(const RunConfig &cfg);
RunConfig run_config_from_json(const nlohmann::json &j);

// Executes one command; exceptions are mapped to exit codes with a message on stderr.
int run(const RunConfig &cfg);

// Parses argv (CLI11) and runs; `replay <run_config.json>` re-executes a recorded configuration.
int main(int argc, char **argv);

} // namespace lmm::cli
