#include "lmm/bessel.hpp"

#include "lmm/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace lmm::special {
namespace {

// Power-series coefficients of 1/Gamma(z) = sum_k c[k] z^{k+1} (Abramowitz & Stegun 6.1.34).
constexpr std::array<double, 26> kInvGammaSeries = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

struct TemmeGammas {
    double gam1;   // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
    double gam2;   // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
    double gampl;  // 1/Gamma(1+mu)
    double gammi;  // 1/Gamma(1-mu)
};

// 1/Gamma(1+z) = sum_k c[k] z^k, so the even/odd parts give gam2/gam1 without cancellation.
TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double even = 0.0;
    double odd = 0.0;
    double pw = 1.0;
    for (std::size_t k = 0; k < kInvGammaSeries.size(); k += 2) {
        even += kInvGammaSeries[k] * pw;
        if (k + 1 < kInvGammaSeries.size()) {
            odd += kInvGammaSeries[k + 1] * pw;
        }
        pw *= mu2;
    }
    TemmeGammas g{};
    g.gam2 = even;
    g.gam1 = -odd;
    g.gampl = even + mu * odd;
    g.gammi = even - mu * odd;
    return g;
}

constexpr int kMaxIter = 100000;
constexpr double kEps = 1e-16;

// Returns exp(x) K_mu(x) and exp(x) K_{mu+1}(x) for |mu| <= 1/2.
std::pair<double, double> k_pair_scaled(double mu, double x) {
    const double pi = std::numbers::pi;
    const double xi = 1.0 / x;
    const double xi2 = 2.0 * xi;
    const double mu2 = mu * mu;
    if (x < 2.0) {
        const double x2 = 0.5 * x;
        const double pimu = pi * mu;
        const double fact = std::fabs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::fabs(e) < kEps ? 1.0 : std::sinh(e) / e;
        const TemmeGammas g = temme_gammas(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= kMaxIter; ++i) {
            const double di = i;
            ff = (di * ff + p + q) / (di * di - mu2);
            c *= d / di;
            p /= di - mu;
            q /= di + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - di * ff);
            if (std::fabs(del) < std::fabs(sum) * kEps) {
                break;
            }
        }
        const double ex = std::exp(x);
        return {sum * ex, sum1 * xi2 * ex};
    }
    // Steed's algorithm for the continued fraction CF2.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::fabs(dels / s) < kEps) {
            break;
        }
    }
    h *= a1;
    const double kmu = std::sqrt(pi / (2.0 * x)) / s;
    const double k1 = kmu * (mu + x + 0.5 - h) * xi;
    return {kmu, k1};
}

} // namespace

double bessel_k_scaled(double nu, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw EvaluationError("bessel_k: argument must be positive and finite");
    }
    nu = std::fabs(nu); // K_{-nu} = K_nu
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    auto [kmu, k1] = k_pair_scaled(mu, x);
    const double xi2 = 2.0 / x;
    for (int i = 1; i <= nl; ++i) {
        const double next = (mu + i) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    if (!std::isfinite(kmu)) {
        throw EvaluationError("bessel_k: result overflowed");
    }
    return kmu;
}

double bessel_k(double nu, double x) {
    return bessel_k_scaled(nu, x) * std::exp(-x);
}

} // namespace lmm::special
