#pragma once

#include "lmm/types.hpp"

#include <Eigen/Core>

namespace lmm {

// Green's function parameters for L = (I - a^2 Laplacian)^b in the plane.
struct KernelSpec {
    double a = 1.0;        // length scale, landmark units
    double b = 1.5;        // smoothness order, b = 3/2 is the conic kernel
    int n = 2;             // spatial dimension; only 2 is supported
    double r_cutoff = 1e-9; // fraction of a below which the force direction is degenerate

    void validate() const;
    bool is_conic() const { return b == 1.5; }
    double cutoff_radius() const { return r_cutoff * a; }
};

// Precomputes the normalisation of one KernelSpec so the particle system can evaluate
// it in a tight loop. value(r) = 2^{1-b} / (2 pi a^{1+b} Gamma(b)) r^{b-1} K_{b-1}(r/a).
class GreenKernel {
  public:
    explicit GreenKernel(const KernelSpec &spec);

    double value(double r) const;
    // dG/dr; throws DegenerateRadiusError for r <= cutoff.
    double derivative(double r) const;
    // Same as derivative() but without the cutoff check; caller guarantees r > cutoff.
    double derivative_unchecked(double r) const;
    double at_zero() const { return g0_; }
    const KernelSpec &spec() const { return spec_; }

  private:
    double bessel_value(double r) const;

    KernelSpec spec_;
    double order_;  // b - 1
    double scale_;  // prefactor of r^{b-1} K_{b-1}(r/a)
    double g0_;     // G(0), +inf when b == 1
};

double green_value(double r, const KernelSpec &spec);
double green_derivative(double r, const KernelSpec &spec);

// Symmetric N x N matrix G_ij = G(|q_i - q_j|).
Eigen::MatrixXd gram_matrix(const Points &points, const KernelSpec &spec);
Eigen::MatrixXd gram_matrix(const Points &points, const GreenKernel &kernel);

} // namespace lmm
