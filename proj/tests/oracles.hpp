#pragma once

// Reference computations that share no code with the library.

#include "lmm/types.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace oracle {

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, trapezoidal rule (spectrally accurate here).
inline double bessel_k_quadrature(double nu, double x) {
    const double h = 1e-3;
    double sum = 0.5 * std::exp(-x);
    for (int k = 1;; ++k) {
        const double t = k * h;
        const double term = std::exp(-x * std::cosh(t) + nu * t) * 0.5 * (1.0 + std::exp(-2.0 * nu * t));
        sum += term;
        if (x * std::cosh(t) - nu * t > 800.0) {
            break;
        }
    }
    return sum * h;
}

// Green's function of (I - a^2 Laplacian)^b in the plane via libstdc++'s Bessel K.
inline double green(double r, double a, double b) {
    const double nu = b - 1.0;
    if (r == 0.0) {
        return 1.0 / (4.0 * std::numbers::pi * a * a * (b - 1.0));
    }
    return std::pow(2.0, 1.0 - b) / (2.0 * std::numbers::pi * std::pow(a, 1.0 + b) * std::tgamma(b)) *
           std::pow(r, nu) * std::cyl_bessel_k(nu, r / a);
}

inline double hamiltonian_conic(const lmm::Points &q, const lmm::Points &p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < q.rows(); ++j) {
            const double r = std::hypot(q(i, 0) - q(j, 0), q(i, 1) - q(j, 1));
            h += (p(i, 0) * p(j, 0) + p(i, 1) * p(j, 1)) * std::exp(-r) / (2.0 * std::numbers::pi);
        }
    }
    return 0.5 * h;
}

// Points on a jittered circle of radius `radius`: pairwise distinct with a floor on spacing.
inline lmm::Points ring(int n, double radius, double jitter, std::mt19937_64 &gen) {
    std::uniform_real_distribution<double> u(-jitter, jitter);
    lmm::Points q(n, 2);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * i / n;
        q(i, 0) = radius * std::cos(t) + u(gen);
        q(i, 1) = radius * std::sin(t) + u(gen);
    }
    return q;
}

inline lmm::Points random_points(int n, double scale, std::mt19937_64 &gen) {
    std::normal_distribution<double> g(0.0, scale);
    lmm::Points p(n, 2);
    for (int i = 0; i < n; ++i) {
        p(i, 0) = g(gen);
        p(i, 1) = g(gen);
    }
    return p;
}

} // namespace oracle
