#pragma once

#include "lmm/geodesic.hpp"
#include "lmm/kernel.hpp"
#include "lmm/types.hpp"

#include <optional>
#include <vector>

namespace lmm {

struct ShootingOptions {
    double h0 = 0.5;      // initial correction parameter
    double shrink = 0.5;  // h <- shrink * h after a miss-fit increase
    double h_floor = 1e-4;
    // Absolute landmark-RMS tolerance. When unset, rel_tol * diameter(reference) is used.
    std::optional<double> tol;
    double rel_tol = 1e-6;
    int max_iter = 500;
    int steps = kDefaultSteps;

    void validate() const;
    double effective_tol(const Points &reference) const;
};

struct ShootingResult {
    MomentumField momentum;  // p_0 on the reference
    Points velocity;         // u_0 = G p_0 at the reference landmarks
    int iterations = 0;
    double final_missfit = 0.0;
    double tolerance = 0.0;
    bool converged = false;
    std::vector<double> missfit_history;
};

// Prediction-correction shooting: u <- u + h (target - Exp(reference, G^{-1} u)) until the
// RMS landmark miss-fit drops below tol. A rejected step (miss-fit increased) is reverted and
// h shrinks; h below h_floor ends the search unconverged. Non-convergence is reported through
// the result, integrator divergence throws ShootingError.
ShootingResult log_map(const LandmarkTemplate &reference, const LandmarkTemplate &target, const KernelSpec &spec,
                       const ShootingOptions &opts = {});

// Same iteration started from a given initial velocity instead of the zero field.
ShootingResult log_map(const LandmarkTemplate &reference, const LandmarkTemplate &target, const KernelSpec &spec,
                       const ShootingOptions &opts, const Points &initial_velocity);

} // namespace lmm
