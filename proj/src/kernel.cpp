#include "lmm/kernel.hpp"

#include "lmm/bessel.hpp"
#include "lmm/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lmm {
namespace {

// Beyond this r/a the Bessel form underflows double precision.
constexpr double kMaxBesselArgument = 700.0;

} // namespace

void KernelSpec::validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw ParameterError("kernel: a must be positive, got " + std::to_string(a));
    }
    if (!(b >= 1.0) || !std::isfinite(b)) {
        throw ParameterError("kernel: b must be >= 1, got " + std::to_string(b));
    }
    if (n != 2) {
        throw ParameterError("kernel: only n = 2 is supported");
    }
    if (!(r_cutoff >= 0.0) || !(r_cutoff < 1e-3)) {
        throw ParameterError("kernel: r_cutoff must lie in [0, 1e-3)");
    }
}

GreenKernel::GreenKernel(const KernelSpec &spec) : spec_(spec) {
    spec_.validate();
    const double a = spec_.a;
    const double b = spec_.b;
    order_ = b - 1.0;
    scale_ = std::pow(2.0, 1.0 - b) / (2.0 * std::numbers::pi * std::pow(a, 1.0 + b) * std::tgamma(b));
    if (spec_.is_conic()) {
        g0_ = 1.0 / (2.0 * std::numbers::pi * a * a);
    } else if (order_ > 0.0) {
        // r^nu K_nu(r/a) -> Gamma(nu) 2^{nu-1} a^nu as r -> 0
        g0_ = 1.0 / (4.0 * std::numbers::pi * a * a * order_);
    } else {
        g0_ = std::numeric_limits<double>::infinity();
    }
}

double GreenKernel::bessel_value(double r) const {
    const double x = r / spec_.a;
    if (x > kMaxBesselArgument) {
        throw EvaluationError("kernel: r/a = " + std::to_string(x) + " exceeds the Bessel evaluation range");
    }
    const double ks = special::bessel_k_scaled(order_, x);
    const double v = scale_ * std::exp(order_ * std::log(r) - x) * ks;
    if (!std::isfinite(v)) {
        // Only reachable very close to the origin where the analytic limit is exact to double precision.
        if (std::isfinite(g0_)) {
            return g0_;
        }
        throw EvaluationError("kernel: value overflowed at r = " + std::to_string(r));
    }
    return v;
}

double GreenKernel::value(double r) const {
    if (!(r >= 0.0)) {
        throw ParameterError("kernel: radius must be non-negative");
    }
    if (spec_.is_conic()) {
        return g0_ * std::exp(-r / spec_.a);
    }
    if (r == 0.0) {
        if (!std::isfinite(g0_)) {
            throw EvaluationError("kernel: G(0) is unbounded for b <= n/2");
        }
        return g0_;
    }
    return bessel_value(r);
}

double GreenKernel::derivative_unchecked(double r) const {
    if (spec_.is_conic()) {
        return -g0_ * std::exp(-r / spec_.a) / spec_.a;
    }
    // d/dr [r^nu K_nu(r/a)] = -(r^nu / a) K_{nu-1}(r/a)
    const double x = r / spec_.a;
    if (x > kMaxBesselArgument) {
        throw EvaluationError("kernel: r/a = " + std::to_string(x) + " exceeds the Bessel evaluation range");
    }
    const double ks = special::bessel_k_scaled(order_ - 1.0, x);
    return -scale_ / spec_.a * std::exp(order_ * std::log(r) - x) * ks;
}

double GreenKernel::derivative(double r) const {
    if (!(r > spec_.cutoff_radius())) {
        throw DegenerateRadiusError("kernel: derivative requested at degenerate radius " + std::to_string(r));
    }
    return derivative_unchecked(r);
}

double green_value(double r, const KernelSpec &spec) {
    return GreenKernel(spec).value(r);
}

double green_derivative(double r, const KernelSpec &spec) {
    return GreenKernel(spec).derivative(r);
}

Eigen::MatrixXd gram_matrix(const Points &points, const GreenKernel &kernel) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd g(n, n);
    const double g0 = kernel.value(0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = g0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = kernel.value((points.row(i) - points.row(j)).norm());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

Eigen::MatrixXd gram_matrix(const Points &points, const KernelSpec &spec) {
    return gram_matrix(points, GreenKernel(spec));
}

} // namespace lmm
