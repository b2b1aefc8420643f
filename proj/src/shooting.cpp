#include "lmm/shooting.hpp"

#include "lmm/errors.hpp"

#include <cmath>
#include <string>

namespace lmm {

void ShootingOptions::validate() const {
    if (!(h0 > 0.0)) {
        throw ParameterError("shooting: h0 must be positive");
    }
    if (!(shrink > 0.0 && shrink < 1.0)) {
        throw ParameterError("shooting: shrink must lie in (0, 1)");
    }
    if (tol && !(*tol > 0.0)) {
        throw ParameterError("shooting: tol must be positive");
    }
    if (!tol && !(rel_tol > 0.0)) {
        throw ParameterError("shooting: rel_tol must be positive");
    }
    if (max_iter < 1) {
        throw ParameterError("shooting: max_iter must be >= 1");
    }
    if (steps < 1) {
        throw ParameterError("shooting: steps must be >= 1");
    }
}

double ShootingOptions::effective_tol(const Points &reference) const {
    if (tol) {
        return *tol;
    }
    const double d = diameter(reference);
    // single landmark or collapsed template: fall back to a unit length scale
    return rel_tol * (d > 0.0 ? d : 1.0);
}

ShootingResult log_map(const LandmarkTemplate &reference, const LandmarkTemplate &target, const KernelSpec &spec,
                       const ShootingOptions &opts) {
    return log_map(reference, target, spec, opts, Points::Zero(reference.points.rows(), 2));
}

ShootingResult log_map(const LandmarkTemplate &reference, const LandmarkTemplate &target, const KernelSpec &spec,
                       const ShootingOptions &opts, const Points &initial_velocity) {
    validate(reference);
    validate(target);
    opts.validate();
    if (reference.size() != target.size()) {
        throw ParameterError("log_map: reference has " + std::to_string(reference.size()) + " landmarks, target has " +
                             std::to_string(target.size()));
    }
    if (initial_velocity.rows() != reference.size() || !initial_velocity.allFinite()) {
        throw ParameterError("log_map: initial velocity does not match the reference");
    }
    const GreenKernel kernel(spec);
    const Points &q0 = reference.points;
    const Points &goal = target.points;

    ShootingResult res;
    res.tolerance = opts.effective_tol(q0);
    res.momentum.base = reference;

    Points u = initial_velocity;
    Points p;
    Points reached;
    try {
        p = u.isZero(0.0) ? Points(Points::Zero(q0.rows(), 2)) : velocity_to_momentum(q0, u, kernel);
        reached = shoot_positions(q0, p, kernel, opts.steps);
    } catch (const DivergenceError &e) {
        throw ShootingError(std::string("log_map: ") + e.what());
    }
    double missfit = rms_distance(reached, goal);
    double h = opts.h0;

    int k = 0;
    while (missfit > res.tolerance && k < opts.max_iter) {
        ++k;
        const Points u_trial = u + h * (goal - reached);
        Points p_trial;
        Points reached_trial;
        try {
            p_trial = velocity_to_momentum(q0, u_trial, kernel);
            reached_trial = shoot_positions(q0, p_trial, kernel, opts.steps);
        } catch (const DivergenceError &e) {
            throw ShootingError(std::string("log_map: ") + e.what());
        }
        const double trial = rms_distance(reached_trial, goal);
        if (trial > missfit) {
            h *= opts.shrink;
            res.missfit_history.push_back(missfit);
            if (h < opts.h_floor) {
                break;
            }
            continue;
        }
        u = u_trial;
        p = std::move(p_trial);
        reached = std::move(reached_trial);
        missfit = trial;
        res.missfit_history.push_back(missfit);
    }

    res.iterations = k;
    res.final_missfit = missfit;
    res.converged = missfit <= res.tolerance;
    res.momentum.momenta = std::move(p);
    res.velocity = std::move(u);
    return res;
}

} // namespace lmm
