#pragma once

#include "lmm/averaging.hpp"
#include "lmm/kernel.hpp"
#include "lmm/stats.hpp"
#include "lmm/types.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lmm {

// Rows fed to the per-landmark model: residual momenta, or raw landmark coordinates.
enum class FeatureMode { momentum, position };

std::string to_string(FeatureMode mode);

struct DetectOptions {
    KernelSpec kernel;
    WeightScheme scheme;
    AverageOptions averaging;
    stats::HyperConfig hyper;
    stats::McmcOptions mcmc;
    stats::ContourOptions contour;
    double level = 0.95;
    double threshold = 0.5;
    // Method 1 flags landmark j when |mean(S_j)| exceeds this many standard errors of the mean.
    double method1_factor = 3.0;
    std::size_t predictive_count = 0;  // 0: one draw per retained posterior sample
    bool contours = true;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    void validate() const;
};

struct CellReport {
    std::string group;  // "N" or "S"
    int landmark = 1;
    double mean_norm = 0.0;
    std::array<double, 5> psrf{};
    double min_acceptance = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    stats::PredictiveSummary predictive;
};

struct ModeReport {
    FeatureMode mode = FeatureMode::momentum;
    std::vector<CellReport> control;  // landmark order
    std::vector<CellReport> cases;
    std::vector<double> ratios;
    std::vector<int> predictor;
};

struct Method1Report {
    std::vector<double> control_norms;
    std::vector<double> case_norms;
    std::vector<double> case_standard_errors;
    std::vector<int> flagged;
};

struct DetectionReport {
    LandmarkTemplate control_average;
    int average_iterations = 0;
    bool average_converged = false;
    double average_epsilon = 0.0;
    std::vector<MomentumField> control_momenta;
    std::vector<MomentumField> case_momenta;
    std::vector<double> case_missfits;
    std::vector<bool> case_converged;
    Method1Report method1;
    ModeReport momentum;
    ModeReport position;
    std::vector<int> predictor;  // Method 1 flags united with the momentum-mode Method 2 set
    DetectOptions options;

    bool converged() const;
};

// Per-landmark observation matrices of one group: row i of landmark j is member i's j-th point.
std::vector<stats::LandmarkSampleMatrix> landmark_samples(const std::vector<Points> &members, const std::string &group);

// Method 2 on prepared per-landmark samples of both groups.
ModeReport compare_groups(const std::vector<stats::LandmarkSampleMatrix> &control,
                          const std::vector<stats::LandmarkSampleMatrix> &cases, FeatureMode mode,
                          const DetectOptions &opts);

// Control average, case Log maps, Method 1, and Method 2 in momentum and position modes.
DetectionReport detect(const std::vector<LandmarkTemplate> &controls, const std::vector<LandmarkTemplate> &cases,
                       const DetectOptions &opts);

nlohmann::ordered_json to_json(const DetectOptions &opts);
// Everything except the contour polygons and predictive samples, in a fixed key order.
nlohmann::ordered_json to_json(const DetectionReport &report);

// landmark,group,x,y rows; predictive scatter is capped at `scatter_limit` draws per cell.
void write_contours_csv(const ModeReport &mode, const std::filesystem::path &path);
void write_predictive_csv(const ModeReport &mode, const std::filesystem::path &path, std::size_t scatter_limit = 1000);

} // namespace lmm
