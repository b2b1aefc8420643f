#pragma once

#include "lmm/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lmm::stats {

// Observation rows (x, y) of one landmark in one group: momentum coordinates or raw positions.
struct LandmarkSampleMatrix {
    std::string group;      // "N" (controls) or "S" (cases)
    int landmark_index = 1; // 1-based
    Points rows;
};

struct ModelParameters {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double rho = 0.0;
};

// sigma_x0 / sigma_y0 / sigma_rho are prior standard deviations, i.e. precision^{-1/2}.
struct HyperParameters {
    double mu_x0 = 0.0, mu_y0 = 0.0;
    double sigma_x0 = 1.0, sigma_y0 = 1.0;
    double a_x = 0.25, b_x = 0.5, a_y = 0.25, b_y = 0.5;
    double mu_rho = 0.0, sigma_rho = 1.0;
};

// How the second argument of the Normal hyper-priors N(0, 10) and N(0, 2) is read.
enum class PriorScale { variance, precision };

std::string to_string(PriorScale s);
PriorScale parse_prior_scale(const std::string &s);

struct HyperConfig {
    double mean_hyper_scale = 10.0;     // mu_x0, mu_y0 ~ N(0, .)
    double rho_mean_hyper_scale = 2.0;  // mu_rho ~ N(0, .)
    PriorScale convention = PriorScale::variance;
    double precision_upper = 1.0;       // precisions ~ U(0, .)
    double gamma_shape_upper = 0.5;     // a ~ U(0, .)
    double gamma_rate_upper = 1.0;      // b ~ U(0, .)

    double mean_hyper_variance() const;
    double rho_mean_hyper_variance() const;
    void validate() const;
};

struct McmcOptions {
    int chains = 4;
    int burn_in = 5000;
    int draws = 20000;  // retained draws summed over chains
    int thin = 4;
    int adapt_interval = 100;
    double target_low = 0.2;   // random-walk acceptance band during burn-in
    double target_high = 0.4;
    int min_draws = 100;

    void validate() const;
    int draws_per_chain() const { return (draws + chains - 1) / chains; }
};

struct ChainDiagnostics {
    std::uint64_t seed = 0;
    // Post-burn-in acceptance rates of the random-walk coordinates.
    std::vector<std::pair<std::string, double>> acceptance;
};

struct PosteriorDraws {
    std::vector<std::vector<ModelParameters>> chains;
    std::vector<std::vector<HyperParameters>> hyper;
    McmcOptions options;
    HyperConfig hyper_config;
    std::uint64_t seed = 0;
    std::vector<ChainDiagnostics> diagnostics;
    std::vector<std::string> warnings;

    std::size_t size() const;
    std::vector<ModelParameters> pooled() const;
};

// Metropolis-within-Gibbs for one landmark/group cell of the hierarchical bivariate-normal model:
//   (x, y)_i ~ N(mu, Sigma(sigma_x, sigma_y, rho)), written as [x][y | x]
//   mu_x ~ N(mu_x0, 1/tau_x0), mu_x0 ~ N(0, V), tau_x0 ~ U(0, 1)        (same for y)
//   sigma_x ~ Gamma(a_x, b_x) shape-rate, a_x ~ U(0, 0.5), b_x ~ U(0, 1)  (same for y)
//   rho ~ N(mu_rho, 1/tau_rho) truncated to (-1, 1), mu_rho ~ N(0, V_rho), tau_rho ~ U(0, 1)
// The mean block, mu_x0/mu_y0 and the truncated-gamma coordinates are drawn exactly; the rest use
// random-walk Metropolis with scales adapted during burn-in only.
PosteriorDraws fit_posterior(const LandmarkSampleMatrix &sample, const HyperConfig &hyper,
                             const McmcOptions &mcmc, std::uint64_t seed);

// Gelman-Rubin potential scale reduction over equal-length chains.
double psrf(const std::vector<std::vector<double>> &chains);
// PSRF of (mu_x, mu_y, sigma_x, sigma_y, rho).
std::array<double, 5> psrf(const PosteriorDraws &draws);

// One bivariate-normal variate per retained posterior draw (cycling when count exceeds the draws).
Points predictive_draws(const PosteriorDraws &posterior, std::size_t count, std::uint64_t seed);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

struct Box {
    Interval x;
    Interval y;
    double area() const { return x.width() * y.width(); }
};

// Linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double p);

// Central interval: (q_{(1-level)/2}, q_{(1+level)/2}).
Interval marginal_interval(std::span<const double> draws, double level = 0.95);

// area(A n B) / area(A u B) for axis-aligned boxes; 0 when disjoint.
double overlap_ratio_boxes(const Box &a, const Box &b);

using Polygon = std::vector<Vec2>;

struct ContourOptions {
    int nx = 256;
    int ny = 256;
    double pad_bandwidths = 3.0;
    double bandwidth_scale = 1.0;  // multiplies the Silverman bandwidth
    std::size_t min_draws = 100;
};

struct Contour {
    Polygon polygon;     // counter-clockwise, not repeated at the end
    double density_level = 0.0;
    double mass = 0.0;   // estimated probability inside the level set
    Vec2 bandwidth = Vec2::Zero();
};

// Highest-density region of a 2-D sample: Gaussian product-kernel KDE on a grid, the density
// level enclosing `level` of the mass, and its largest iso-density loop.
Contour hpd_contour(const Points &sample, double level = 0.95, const ContourOptions &opts = {});

// Signed shoelace area (positive for counter-clockwise).
double polygon_area(const Polygon &poly);

struct PredictiveSummary {
    Points draws;
    Interval x;
    Interval y;
    Contour contour;
    Box box() const { return {x, y}; }
};

// Landmarks (1-based, ascending) with ratio strictly below the threshold.
std::vector<int> select_predictor(const std::vector<double> &ratios, double threshold = 0.5);

// Euclidean norm of the column-wise mean row.
double mean_momentum_norm(const LandmarkSampleMatrix &sample);

} // namespace lmm::stats
