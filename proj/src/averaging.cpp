#include "lmm/averaging.hpp"

#include "lmm/errors.hpp"
#include "lmm/geodesic.hpp"
#include "lmm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lmm {
namespace {

void validate_group(const std::vector<LandmarkTemplate> &group) {
    if (group.empty()) {
        throw ParameterError("group average needs at least one member");
    }
    for (const auto &t : group) {
        validate(t);
        if (t.size() != group.front().size()) {
            throw ParameterError("group members have different landmark counts");
        }
    }
}

bool lex_less(const Points &a, const Points &b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Member indices sorted by coordinates; every reduction runs in this order so the result does
// not depend on how the caller ordered the group.
std::vector<std::size_t> canonical_order(const std::vector<LandmarkTemplate> &group) {
    std::vector<std::size_t> order(group.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return lex_less(group[i].points, group[j].points); });
    return order;
}

double weighted_objective(WeightKind kind, const std::vector<double> &d, const std::vector<std::size_t> &order) {
    double f = 0.0;
    for (std::size_t i : order) {
        f += kind == WeightKind::robust ? d[i] : d[i] * d[i];
    }
    return f;
}

} // namespace

std::string to_string(WeightKind kind) {
    return kind == WeightKind::robust ? "robust" : "equal";
}

WeightKind parse_weight_kind(const std::string &name) {
    if (name == "equal") {
        return WeightKind::equal;
    }
    if (name == "robust") {
        return WeightKind::robust;
    }
    throw ParameterError("unknown weight scheme '" + name + "' (expected equal or robust)");
}

double AverageOptions::effective_epsilon(Eigen::Index landmarks) const {
    return epsilon ? *epsilon : 1e-6 * std::sqrt(static_cast<double>(landmarks));
}

std::vector<double> compute_weights(const WeightScheme &scheme, const std::vector<double> &norms) {
    if (norms.empty()) {
        throw ParameterError("compute_weights: empty group");
    }
    if (!(scheme.epsilon_d > 0.0)) {
        throw ParameterError("compute_weights: epsilon_d must be positive");
    }
    const std::size_t m = norms.size();
    std::vector<double> w(m);
    if (scheme.kind == WeightKind::equal) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
        return w;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(norms[i] >= 0.0)) {
            throw ParameterError("compute_weights: norms must be non-negative");
        }
        w[i] = 1.0 / std::max(norms[i], scheme.epsilon_d);
        total += w[i];
    }
    for (double &x : w) {
        x /= total;
    }
    return w;
}

LandmarkTemplate initial_average_guess(const std::vector<LandmarkTemplate> &group) {
    validate_group(group);
    const auto order = canonical_order(group);
    Points mean = Points::Zero(group.front().size(), 2);
    for (std::size_t i : order) {
        mean += group[i].points;
    }
    mean /= static_cast<double>(group.size());

    double scale = 0.0;
    for (const auto &t : group) {
        scale = std::max(scale, diameter(t.points));
    }
    if (scale == 0.0) {
        scale = 1.0;
    }
    const bool coincides = std::any_of(group.begin(), group.end(), [&](const LandmarkTemplate &t) {
        return rms_distance(t.points, mean) <= 1e-9 * scale;
    });
    if (coincides) {
        constexpr double golden_angle = 2.399963229728653;
        for (Eigen::Index i = 0; i < mean.rows(); ++i) {
            const double phi = golden_angle * static_cast<double>(i + 1);
            mean(i, 0) += 1e-3 * scale * std::cos(phi);
            mean(i, 1) += 1e-3 * scale * std::sin(phi);
        }
    }
    return {mean, "average"};
}

AverageResult group_average(const std::vector<LandmarkTemplate> &group, const WeightScheme &scheme,
                            const KernelSpec &spec, const AverageOptions &opts) {
    validate_group(group);
    opts.shooting.validate();
    if (opts.max_iter < 1) {
        throw ParameterError("group average: max_iter must be >= 1");
    }
    if (!(scheme.epsilon_d > 0.0)) {
        throw ParameterError("group average: epsilon_d must be positive");
    }
    const GreenKernel kernel(spec);
    const std::size_t m = group.size();
    const Eigen::Index n = group.front().size();
    const auto order = canonical_order(group);

    // Identical members share one Log map.
    std::vector<std::size_t> distinct;
    std::vector<std::size_t> slot(m);
    for (std::size_t pos = 0; pos < m; ++pos) {
        const std::size_t i = order[pos];
        if (distinct.empty() || group[distinct.back()].points != group[i].points) {
            distinct.push_back(i);
        }
        slot[i] = distinct.size() - 1;
    }

    AverageResult res;
    res.epsilon = opts.effective_epsilon(n);
    if (opts.initial_guess) {
        validate(*opts.initial_guess);
        if (opts.initial_guess->size() != n) {
            throw ParameterError("group average: initial guess has the wrong landmark count");
        }
        for (const auto &t : group) {
            if (t.points == opts.initial_guess->points) {
                throw ParameterError("group average: the initial guess must not be a group member");
            }
        }
        res.initial_guess = *opts.initial_guess;
    } else {
        res.initial_guess = initial_average_guess(group);
    }
    LandmarkTemplate current = res.initial_guess;
    current.label = "average";

    std::vector<Points> warm(distinct.size(), Points::Zero(n, 2));
    std::vector<ShootingResult> logs(distinct.size());
    std::vector<double> dist(m);
    Points pbar_prev = Points::Zero(n, 2);

    for (int k = 0; k < opts.max_iter; ++k) {
        parallel_for(distinct.size(), opts.threads, [&](std::size_t d) {
            const std::size_t member = distinct[d];
            ShootingResult r = log_map(current, group[member], spec, opts.shooting,
                                       opts.warm_start ? warm[d] : Points(Points::Zero(n, 2)));
            if (!r.converged) {
                std::ostringstream os;
                os << "group average: Log map to member " << member + 1 << " ('" << group[member].label
                   << "') did not converge (miss-fit " << r.final_missfit << " after " << r.iterations
                   << " iterations)";
                throw AveragingError(os.str(), member);
            }
            logs[d] = std::move(r);
        });

        std::vector<double> dist_distinct(distinct.size());
        for (std::size_t d = 0; d < distinct.size(); ++d) {
            dist_distinct[d] = std::sqrt(std::max(0.0, sobolev_norm_sq(current.points, logs[d].momentum.momenta, kernel)));
        }
        for (std::size_t i = 0; i < m; ++i) {
            dist[i] = dist_distinct[slot[i]];
        }
        const std::vector<double> w = compute_weights(scheme, dist);

        Points pbar = Points::Zero(n, 2);
        for (std::size_t i : order) {
            pbar += w[i] * logs[slot[i]].momentum.momenta;
        }
        const double change = (pbar - pbar_prev).norm();
        res.objective_history.push_back(weighted_objective(scheme.kind, dist, order));
        res.step_history.push_back(change);
        res.iterations = k + 1;
        res.weights = w;
        res.distances = dist;
        res.final_mean_momentum_norm = pbar.norm();

        if (change <= res.epsilon && pbar.norm() <= res.epsilon) {
            res.converged = true;
            break;
        }
        if (k + 1 == opts.max_iter) {
            break;
        }

        const Points ubar = gram_matrix(current.points, kernel) * pbar;
        for (std::size_t d = 0; d < distinct.size(); ++d) {
            warm[d] = logs[d].velocity - ubar;
        }
        try {
            current.points = shoot_positions(current.points, pbar, kernel, opts.shooting.steps);
        } catch (const DivergenceError &e) {
            throw AveragingError(std::string("group average: Exp map of the averaged momentum failed: ") + e.what(),
                                 m);
        }
        pbar_prev = pbar;
    }

    res.average = current;
    res.residual_momenta.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        MomentumField f{logs[slot[i]].momentum.momenta, current};
        res.residual_momenta.push_back(std::move(f));
    }
    return res;
}

double objective(const std::vector<LandmarkTemplate> &group, const LandmarkTemplate &candidate,
                 const WeightScheme &scheme, const KernelSpec &spec, const ShootingOptions &opts) {
    validate_group(group);
    validate(candidate);
    const GreenKernel kernel(spec);
    const auto order = canonical_order(group);
    std::vector<double> d(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
        const ShootingResult r = log_map(candidate, group[i], spec, opts);
        if (!r.converged) {
            throw AveragingError("objective: Log map to member " + std::to_string(i + 1) + " did not converge", i);
        }
        d[i] = std::sqrt(std::max(0.0, sobolev_norm_sq(candidate.points, r.momentum.momenta, kernel)));
    }
    return weighted_objective(scheme.kind, d, order);
}

} // namespace lmm
