#pragma once

namespace lmm::special {

// Modified Bessel function of the second kind, K_nu(x), for real nu and x > 0.
// Temme's series for x < 2, Steed's continued fraction otherwise, then forward
// recurrence in the order.
double bessel_k(double nu, double x);

// exp(x) * K_nu(x); stays representable for large x.
double bessel_k_scaled(double nu, double x);

} // namespace lmm::special
