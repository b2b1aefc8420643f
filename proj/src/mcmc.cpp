#include "lmm/stats.hpp"

#include "lmm/errors.hpp"
#include "lmm/rng.hpp"

#include <boost/random/gamma_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lmm::stats {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SufficientStats {
    double n = 0.0;
    double xbar = 0.0, ybar = 0.0;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;  // centred sums of squares / products
};

SufficientStats summarise(const Points &rows) {
    SufficientStats s;
    s.n = static_cast<double>(rows.rows());
    s.xbar = rows.col(0).mean();
    s.ybar = rows.col(1).mean();
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const double dx = rows(i, 0) - s.xbar;
        const double dy = rows(i, 1) - s.ybar;
        s.sxx += dx * dx;
        s.syy += dy * dy;
        s.sxy += dx * dy;
    }
    return s;
}

// Bivariate-normal log likelihood as [x] [y | x].
double log_likelihood(const SufficientStats &s, double mx, double my, double sx, double sy, double rho) {
    const double dx = s.xbar - mx;
    const double dy = s.ybar - my;
    const double qxx = s.sxx + s.n * dx * dx;
    const double qyy = s.syy + s.n * dy * dy;
    const double qxy = s.sxy + s.n * dx * dy;
    const double one_m_r2 = 1.0 - rho * rho;
    const double beta = rho * sy / sx;
    const double cond_var = sy * sy * one_m_r2;
    const double marginal = -s.n * std::log(sx) - qxx / (2.0 * sx * sx);
    const double conditional =
        -0.5 * s.n * std::log(cond_var) - (qyy - 2.0 * beta * qxy + beta * beta * qxx) / (2.0 * cond_var);
    return -s.n * std::log(2.0 * std::numbers::pi) + marginal + conditional;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// log of the (-1, 1) normalising mass of N(mu, 1/tau).
double log_trunc_mass(double mu, double tau) {
    const double st = std::sqrt(tau);
    const double z = normal_cdf((1.0 - mu) * st) - normal_cdf((-1.0 - mu) * st);
    return z > 0.0 ? std::log(z) : kNegInf;
}

// Gamma(shape, rate) restricted to (0, upper).
double truncated_gamma(Rng &rng, double shape, double rate, double upper) {
    const double lu = rate * upper;
    if (lu <= 2.0) {
        // proposal proportional to x^{shape-1} on (0, upper); acceptance exp(-rate x) >= e^{-2}
        for (;;) {
            const double x = upper * std::pow(rng.uniform(), 1.0 / shape);
            if (rng.uniform() <= std::exp(-rate * x)) {
                return std::max(x, std::numeric_limits<double>::min());
            }
        }
    }
    boost::random::gamma_distribution<double> gamma(shape, 1.0 / rate);
    for (;;) {
        const double x = gamma(rng.engine());
        if (x < upper && x > 0.0) {
            return x;
        }
    }
}

struct ChainState {
    ModelParameters th;
    double mx0 = 0.0, my0 = 0.0, tx0 = 0.5, ty0 = 0.5;
    double ax = 0.25, bx = 0.5, ay = 0.25, by = 0.5;
    double mr = 0.0, tr = 0.5;
};

enum RwCoord { kLogSx, kLogSy, kRho, kAx, kAy, kMuRho, kTauRho, kRwCount };
constexpr const char *kRwNames[kRwCount] = {"sigma_x", "sigma_y", "rho", "a_x", "a_y", "mu_rho", "tau_rho"};

struct RandomWalk {
    double scale = 0.5;
    long accepted = 0;
    long attempted = 0;
    long window_acc = 0;
    long window_att = 0;

    bool step(Rng &rng, double log_ratio) {
        ++attempted;
        ++window_att;
        if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
            ++accepted;
            ++window_acc;
            return true;
        }
        return false;
    }
};

class CellSampler {
  public:
    CellSampler(const SufficientStats &s, const HyperConfig &h, const McmcOptions &o, Rng &rng)
        : s_(s), h_(h), o_(o), rng_(rng), v_mean_(h.mean_hyper_variance()), v_rho_(h.rho_mean_hyper_variance()) {}

    void initialise(int chain) {
        const double sdx = std::sqrt(s_.sxx / (s_.n - 1.0));
        const double sdy = std::sqrt(s_.syy / (s_.n - 1.0));
        const double r = std::clamp(s_.sxy / std::sqrt(s_.sxx * s_.syy), -0.9, 0.9);
        // chain 0 starts at the sample moments, the others are overdispersed around them
        const double spread = chain == 0 ? 0.0 : 1.0;
        st_.th.mu_x = s_.xbar + spread * 2.0 * sdx / std::sqrt(s_.n) * rng_.normal();
        st_.th.mu_y = s_.ybar + spread * 2.0 * sdy / std::sqrt(s_.n) * rng_.normal();
        st_.th.sigma_x = sdx * std::exp(spread * 0.3 * rng_.normal());
        st_.th.sigma_y = sdy * std::exp(spread * 0.3 * rng_.normal());
        st_.th.rho = std::clamp(r + spread * 0.2 * rng_.normal(), -0.95, 0.95);
        st_.mx0 = st_.th.mu_x;
        st_.my0 = st_.th.mu_y;
        st_.mr = st_.th.rho;
        rw_[kLogSx].scale = rw_[kLogSy].scale = 2.0 / std::sqrt(2.0 * s_.n);
        rw_[kRho].scale = std::max(0.02, (1.0 - r * r) / std::sqrt(s_.n));
        rw_[kAx].scale = rw_[kAy].scale = 0.15;
        rw_[kMuRho].scale = 1.0;
        rw_[kTauRho].scale = 0.3;
    }

    void sweep() {
        ModelParameters &th = st_.th;
        draw_means();
        th.sigma_x = update_sigma(kLogSx, th.sigma_x, st_.ax, st_.bx, true);
        th.sigma_y = update_sigma(kLogSy, th.sigma_y, st_.ay, st_.by, false);
        update_rho();
        draw_mean_hyper(st_.mx0, st_.tx0, th.mu_x);
        draw_mean_hyper(st_.my0, st_.ty0, th.mu_y);
        update_gamma_hyper(kAx, st_.ax, st_.bx, th.sigma_x);
        update_gamma_hyper(kAy, st_.ay, st_.by, th.sigma_y);
        update_rho_hyper();
    }

    void adapt() {
        for (auto &rw : rw_) {
            if (rw.window_att == 0) {
                continue;
            }
            const double rate = static_cast<double>(rw.window_acc) / static_cast<double>(rw.window_att);
            if (rate < o_.target_low) {
                rw.scale *= 0.7;
            } else if (rate > o_.target_high) {
                rw.scale *= 1.4;
            }
            rw.window_acc = rw.window_att = 0;
        }
    }

    void reset_counters() {
        for (auto &rw : rw_) {
            rw.accepted = rw.attempted = rw.window_acc = rw.window_att = 0;
        }
    }

    const ModelParameters &parameters() const { return st_.th; }

    HyperParameters hyper() const {
        HyperParameters h;
        h.mu_x0 = st_.mx0;
        h.mu_y0 = st_.my0;
        h.sigma_x0 = 1.0 / std::sqrt(st_.tx0);
        h.sigma_y0 = 1.0 / std::sqrt(st_.ty0);
        h.a_x = st_.ax;
        h.b_x = st_.bx;
        h.a_y = st_.ay;
        h.b_y = st_.by;
        h.mu_rho = st_.mr;
        h.sigma_rho = 1.0 / std::sqrt(st_.tr);
        return h;
    }

    std::vector<std::pair<std::string, double>> acceptance() const {
        std::vector<std::pair<std::string, double>> out;
        for (int c = 0; c < kRwCount; ++c) {
            const auto &rw = rw_[c];
            out.emplace_back(kRwNames[c], rw.attempted ? static_cast<double>(rw.accepted) / rw.attempted : 0.0);
        }
        return out;
    }

  private:
    double ll(double mx, double my, double sx, double sy, double rho) const {
        return log_likelihood(s_, mx, my, sx, sy, rho);
    }

    // (mu_x, mu_y) | rest: Gaussian with precision n Sigma^{-1} + diag(tau_x0, tau_y0).
    void draw_means() {
        ModelParameters &th = st_.th;
        const double omr2 = 1.0 - th.rho * th.rho;
        const double ixx = 1.0 / (th.sigma_x * th.sigma_x * omr2);
        const double iyy = 1.0 / (th.sigma_y * th.sigma_y * omr2);
        const double ixy = -th.rho / (th.sigma_x * th.sigma_y * omr2);
        const double pxx = s_.n * ixx + st_.tx0;
        const double pyy = s_.n * iyy + st_.ty0;
        const double pxy = s_.n * ixy;
        const double bx = s_.n * (ixx * s_.xbar + ixy * s_.ybar) + st_.tx0 * st_.mx0;
        const double by = s_.n * (ixy * s_.xbar + iyy * s_.ybar) + st_.ty0 * st_.my0;
        const double det = pxx * pyy - pxy * pxy;
        const double mean_x = (pyy * bx - pxy * by) / det;
        const double mean_y = (pxx * by - pxy * bx) / det;
        // precision = L L^T; draw = mean + L^{-T} z
        const double l11 = std::sqrt(pxx);
        const double l21 = pxy / l11;
        const double l22 = std::sqrt(pyy - l21 * l21);
        const double z1 = rng_.normal();
        const double z2 = rng_.normal();
        const double e2 = z2 / l22;
        const double e1 = (z1 - l21 * e2) / l11;
        th.mu_x = mean_x + e1;
        th.mu_y = mean_y + e2;
    }

    // Random walk on log sigma; target includes the Gamma(a, b) prior and the log Jacobian.
    double update_sigma(RwCoord c, double sigma, double a, double b, bool is_x) {
        const ModelParameters &th = st_.th;
        const double prop = sigma * std::exp(rw_[c].scale * rng_.normal());
        auto target = [&](double sg) {
            const double lik = is_x ? ll(th.mu_x, th.mu_y, sg, th.sigma_y, th.rho)
                                    : ll(th.mu_x, th.mu_y, th.sigma_x, sg, th.rho);
            return lik + a * std::log(sg) - b * sg;
        };
        const double ratio = target(prop) - target(sigma);
        return rw_[c].step(rng_, std::isfinite(ratio) ? ratio : kNegInf) ? prop : sigma;
    }

    void update_rho() {
        ModelParameters &th = st_.th;
        const double prop = th.rho + rw_[kRho].scale * rng_.normal();
        if (std::fabs(prop) >= 1.0) {
            rw_[kRho].step(rng_, kNegInf);
            return;
        }
        auto target = [&](double r) {
            return ll(th.mu_x, th.mu_y, th.sigma_x, th.sigma_y, r) - 0.5 * st_.tr * (r - st_.mr) * (r - st_.mr);
        };
        if (rw_[kRho].step(rng_, target(prop) - target(th.rho))) {
            th.rho = prop;
        }
    }

    // mu0 | mu, tau0 is conjugate normal; tau0 | mu, mu0 is Gamma(3/2, (mu - mu0)^2 / 2) on (0, 1).
    void draw_mean_hyper(double &mu0, double &tau0, double mu) {
        const double prec = 1.0 / v_mean_ + tau0;
        mu0 = tau0 * mu / prec + rng_.normal() / std::sqrt(prec);
        const double d = mu - mu0;
        tau0 = truncated_gamma(rng_, 1.5, 0.5 * d * d, h_.precision_upper);
    }

    // a | sigma, b by random walk on (0, a_max); b | a, sigma is Gamma(a + 1, sigma) on (0, b_max).
    void update_gamma_hyper(RwCoord c, double &a, double &b, double sigma) {
        const double prop = a + rw_[c].scale * rng_.normal();
        if (prop <= 0.0 || prop >= h_.gamma_shape_upper) {
            rw_[c].step(rng_, kNegInf);
        } else {
            auto target = [&](double aa) { return aa * std::log(b) - std::lgamma(aa) + (aa - 1.0) * std::log(sigma); };
            if (rw_[c].step(rng_, target(prop) - target(a))) {
                a = prop;
            }
        }
        b = truncated_gamma(rng_, a + 1.0, sigma, h_.gamma_rate_upper);
    }

    void update_rho_hyper() {
        const double rho = st_.th.rho;
        auto log_tn = [&](double mu, double tau) {
            return 0.5 * std::log(tau) - 0.5 * tau * (rho - mu) * (rho - mu) - log_trunc_mass(mu, tau);
        };
        {
            const double prop = st_.mr + rw_[kMuRho].scale * rng_.normal();
            auto target = [&](double mu) { return -0.5 * mu * mu / v_rho_ + log_tn(mu, st_.tr); };
            const double ratio = target(prop) - target(st_.mr);
            if (rw_[kMuRho].step(rng_, std::isfinite(ratio) ? ratio : kNegInf)) {
                st_.mr = prop;
            }
        }
        {
            const double prop = st_.tr + rw_[kTauRho].scale * rng_.normal();
            if (prop <= 0.0 || prop >= h_.precision_upper) {
                rw_[kTauRho].step(rng_, kNegInf);
            } else {
                const double ratio = log_tn(st_.mr, prop) - log_tn(st_.mr, st_.tr);
                if (rw_[kTauRho].step(rng_, std::isfinite(ratio) ? ratio : kNegInf)) {
                    st_.tr = prop;
                }
            }
        }
    }

    const SufficientStats &s_;
    const HyperConfig &h_;
    const McmcOptions &o_;
    Rng &rng_;
    double v_mean_;
    double v_rho_;
    ChainState st_;
    RandomWalk rw_[kRwCount];
};

} // namespace

std::string to_string(PriorScale s) {
    return s == PriorScale::precision ? "precision" : "variance";
}

PriorScale parse_prior_scale(const std::string &s) {
    if (s == "variance") {
        return PriorScale::variance;
    }
    if (s == "precision") {
        return PriorScale::precision;
    }
    throw ParameterError("prior scale must be 'variance' or 'precision', got '" + s + "'");
}

double HyperConfig::mean_hyper_variance() const {
    return convention == PriorScale::variance ? mean_hyper_scale : 1.0 / mean_hyper_scale;
}

double HyperConfig::rho_mean_hyper_variance() const {
    return convention == PriorScale::variance ? rho_mean_hyper_scale : 1.0 / rho_mean_hyper_scale;
}

void HyperConfig::validate() const {
    if (!(mean_hyper_scale > 0.0) || !(rho_mean_hyper_scale > 0.0) || !(precision_upper > 0.0) ||
        !(gamma_shape_upper > 0.0) || !(gamma_rate_upper > 0.0)) {
        throw ParameterError("hyper-prior scales must be positive");
    }
}

void McmcOptions::validate() const {
    if (chains < 1 || burn_in < 0 || draws < 1 || thin < 1 || adapt_interval < 1) {
        throw ParameterError("mcmc: chains, draws, thin and adapt_interval must be positive, burn_in non-negative");
    }
    if (!(target_low > 0.0 && target_low < target_high && target_high < 1.0)) {
        throw ParameterError("mcmc: invalid acceptance band");
    }
    if (draws < min_draws) {
        throw ParameterError("mcmc: draws must be at least " + std::to_string(min_draws));
    }
}

std::size_t PosteriorDraws::size() const {
    std::size_t n = 0;
    for (const auto &c : chains) {
        n += c.size();
    }
    return n;
}

std::vector<ModelParameters> PosteriorDraws::pooled() const {
    std::vector<ModelParameters> out;
    out.reserve(size());
    for (const auto &c : chains) {
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

PosteriorDraws fit_posterior(const LandmarkSampleMatrix &sample, const HyperConfig &hyper, const McmcOptions &mcmc,
                             std::uint64_t seed) {
    hyper.validate();
    mcmc.validate();
    const std::string cell = "landmark " + std::to_string(sample.landmark_index) + " group " + sample.group;
    if (sample.rows.rows() < 2) {
        throw FitError("fit_posterior (" + cell + "): need at least 2 observations");
    }
    if (!sample.rows.allFinite()) {
        throw FitError("fit_posterior (" + cell + "): non-finite observations");
    }
    const SufficientStats s = summarise(sample.rows);
    const double scale = std::max({1.0, std::fabs(s.xbar), std::fabs(s.ybar)});
    if (s.sxx <= 1e-24 * scale * scale * s.n || s.syy <= 1e-24 * scale * scale * s.n) {
        throw FitError("fit_posterior (" + cell + "): zero variance in a coordinate");
    }
    if (s.sxy * s.sxy >= s.sxx * s.syy * (1.0 - 1e-12)) {
        throw FitError("fit_posterior (" + cell + "): coordinates are perfectly correlated");
    }

    PosteriorDraws out;
    out.options = mcmc;
    out.hyper_config = hyper;
    out.seed = seed;
    const int per_chain = mcmc.draws_per_chain();
    for (int c = 0; c < mcmc.chains; ++c) {
        const std::uint64_t chain_seed = derive_seed(seed, {static_cast<std::uint64_t>(c)});
        Rng rng(chain_seed);
        CellSampler sampler(s, hyper, mcmc, rng);
        sampler.initialise(c);
        for (int it = 1; it <= mcmc.burn_in; ++it) {
            sampler.sweep();
            if (it % mcmc.adapt_interval == 0) {
                sampler.adapt();
            }
        }
        sampler.reset_counters();
        std::vector<ModelParameters> kept;
        std::vector<HyperParameters> kept_hyper;
        kept.reserve(per_chain);
        kept_hyper.reserve(per_chain);
        for (int k = 0; k < per_chain; ++k) {
            for (int t = 0; t < mcmc.thin; ++t) {
                sampler.sweep();
            }
            kept.push_back(sampler.parameters());
            kept_hyper.push_back(sampler.hyper());
        }
        ChainDiagnostics diag;
        diag.seed = chain_seed;
        diag.acceptance = sampler.acceptance();
        for (const auto &[name, rate] : diag.acceptance) {
            if (rate < 0.05 || rate > 0.95) {
                std::ostringstream os;
                os << cell << " chain " << c << ": acceptance rate of " << name << " is " << rate;
                out.warnings.push_back(os.str());
            }
        }
        out.diagnostics.push_back(std::move(diag));
        out.chains.push_back(std::move(kept));
        out.hyper.push_back(std::move(kept_hyper));
    }
    return out;
}

double psrf(const std::vector<std::vector<double>> &chains) {
    if (chains.size() < 2) {
        throw ParameterError("psrf: need at least two chains");
    }
    const std::size_t n = chains.front().size();
    if (n < 2) {
        throw ParameterError("psrf: chains need at least two draws");
    }
    const double m = static_cast<double>(chains.size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto &c : chains) {
        if (c.size() != n) {
            throw ParameterError("psrf: chains must have equal length");
        }
        double mean = 0.0;
        for (double v : c) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : c) {
            var += (v - mean) * (v - mean);
        }
        w += var / static_cast<double>(n - 1);
        means.push_back(mean);
    }
    w /= m;
    double grand = 0.0;
    for (double mu : means) {
        grand += mu;
    }
    grand /= m;
    double b = 0.0;
    for (double mu : means) {
        b += (mu - grand) * (mu - grand);
    }
    b *= static_cast<double>(n) / (m - 1.0);
    const double nn = static_cast<double>(n);
    const double v = (nn - 1.0) / nn * w + b / nn;
    if (w <= 0.0) {
        return v <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return std::sqrt(v / w);
}

std::array<double, 5> psrf(const PosteriorDraws &draws) {
    std::array<double, 5> out{};
    for (int k = 0; k < 5; ++k) {
        std::vector<std::vector<double>> chains;
        for (const auto &c : draws.chains) {
            std::vector<double> v;
            v.reserve(c.size());
            for (const auto &th : c) {
                const double vals[5] = {th.mu_x, th.mu_y, th.sigma_x, th.sigma_y, th.rho};
                v.push_back(vals[k]);
            }
            chains.push_back(std::move(v));
        }
        out[k] = psrf(chains);
    }
    return out;
}

} // namespace lmm::stats
