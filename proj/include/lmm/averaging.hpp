#pragma once

#include "lmm/kernel.hpp"
#include "lmm/shooting.hpp"
#include "lmm/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lmm {

enum class WeightKind { equal, robust };

std::string to_string(WeightKind kind);
WeightKind parse_weight_kind(const std::string &name);

struct WeightScheme {
    WeightKind kind = WeightKind::equal;
    double epsilon_d = 1e-9; // floor on tangent norms for robust weights
};

struct AverageOptions {
    // Inner Log maps. The relative tolerance is far below the shooting default because the
    // stopping rule acts on averaged momenta, which inherit the shooting error through G^{-1}.
    ShootingOptions shooting = [] {
        ShootingOptions s;
        s.rel_tol = 1e-10;
        return s;
    }();
    int max_iter = 100;
    // Threshold on the stacked-momentum Euclidean norm; defaults to 1e-6 sqrt(N).
    std::optional<double> epsilon;
    unsigned threads = 0;
    // Start each inner Log map from u_i - G p_bar of the previous iteration instead of zero.
    bool warm_start = true;
    std::optional<LandmarkTemplate> initial_guess;

    double effective_epsilon(Eigen::Index landmarks) const;
};

struct AverageResult {
    LandmarkTemplate average;
    std::vector<MomentumField> residual_momenta;  // one per member, based at `average`
    std::vector<double> objective_history;        // sum d_i (robust) or sum d_i^2 (equal), per iteration
    std::vector<double> step_history;             // ||p_bar^{k+1} - p_bar^k|| per iteration
    std::vector<double> weights;                  // final weights, member order
    std::vector<double> distances;                // final ||u_i||_L, member order
    LandmarkTemplate initial_guess;
    double epsilon = 0.0;
    double final_mean_momentum_norm = 0.0;        // ||sum w_i p_i|| at return
    int iterations = 0;
    bool converged = false;
};

// Normalised weights: 1/m each, or (1/max(d_i, eps_d)) / sum_j (1/max(d_j, eps_d)).
std::vector<double> compute_weights(const WeightScheme &scheme, const std::vector<double> &norms);

// Default starting point: coordinate-wise mean of the group, nudged by 1e-3 diameter when it
// coincides with a member.
LandmarkTemplate initial_average_guess(const std::vector<LandmarkTemplate> &group);

// Group average on the momentum field: Log maps from the current average to every member,
// weighted momentum average, Exp map forward, repeated until the averaged momentum settles.
// Throws AveragingError when an inner Log map does not converge.
AverageResult group_average(const std::vector<LandmarkTemplate> &group, const WeightScheme &scheme,
                            const KernelSpec &spec, const AverageOptions &opts = {});

// sum_i d(candidate, I_i) for robust weights, sum_i d(candidate, I_i)^2 for equal weights.
double objective(const std::vector<LandmarkTemplate> &group, const LandmarkTemplate &candidate,
                 const WeightScheme &scheme, const KernelSpec &spec, const ShootingOptions &opts = {});

} // namespace lmm
