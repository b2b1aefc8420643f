#include "lmm/stats.hpp"

#include "lmm/errors.hpp"
#include "lmm/rng.hpp"

#include <algorithm>
#include <cmath>

namespace lmm::stats {

Points predictive_draws(const PosteriorDraws &posterior, std::size_t count, std::uint64_t seed) {
    const auto pool = posterior.pooled();
    if (pool.empty()) {
        throw ParameterError("predictive_draws: posterior has no draws");
    }
    if (count == 0) {
        count = pool.size();
    }
    Rng rng(seed);
    Points out(static_cast<Eigen::Index>(count), 2);
    for (std::size_t i = 0; i < count; ++i) {
        const ModelParameters &th = pool[i % pool.size()];
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const auto r = static_cast<Eigen::Index>(i);
        out(r, 0) = th.mu_x + th.sigma_x * z1;
        out(r, 1) = th.mu_y + th.sigma_y * (th.rho * z1 + std::sqrt(1.0 - th.rho * th.rho) * z2);
    }
    return out;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw ParameterError("quantile: empty sample");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ParameterError("quantile: probability outside [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Interval marginal_interval(std::span<const double> draws, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw ParameterError("marginal_interval: level must lie in (0, 1)");
    }
    std::vector<double> v(draws.begin(), draws.end());
    return {quantile(v, 0.5 * (1.0 - level)), quantile(v, 0.5 * (1.0 + level))};
}

double overlap_ratio_boxes(const Box &a, const Box &b) {
    auto overlap = [](const Interval &u, const Interval &v) {
        return std::max(0.0, std::min(u.hi, v.hi) - std::max(u.lo, v.lo));
    };
    const double inter = overlap(a.x, b.x) * overlap(a.y, b.y);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        // both degenerate: identical boxes count as full overlap
        return (a.x.lo == b.x.lo && a.x.hi == b.x.hi && a.y.lo == b.y.lo && a.y.hi == b.y.hi) ? 1.0 : 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<int> select_predictor(const std::vector<double> &ratios, double threshold) {
    std::vector<int> out;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] < threshold) {
            out.push_back(static_cast<int>(i) + 1);
        }
    }
    return out;
}

double mean_momentum_norm(const LandmarkSampleMatrix &sample) {
    if (sample.rows.rows() == 0) {
        throw ParameterError("mean_momentum_norm: empty sample");
    }
    return sample.rows.colwise().mean().norm();
}

} // namespace lmm::stats
