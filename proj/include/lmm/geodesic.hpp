#pragma once

#include "lmm/kernel.hpp"
#include "lmm/types.hpp"

#include <vector>

namespace lmm {

// Discrete (q, p) path of the landmark particle system on a uniform grid over [0, 1].
struct GeodesicTrajectory {
    std::vector<double> times;
    std::vector<Points> positions;
    std::vector<Points> momenta;
    std::vector<double> hamiltonian_samples;

    const Points &final_positions() const { return positions.back(); }
    const Points &final_momenta() const { return momenta.back(); }
};

inline constexpr int kDefaultSteps = 20;

// Classical RK4 integration of
//   dq_i/dt =  sum_j G(|q_i - q_j|) p_j
//   dp_i/dt = -sum_{j != i} (p_i . p_j) G'(|q_i - q_j|) (q_i - q_j) / |q_i - q_j|
// from t = 0 to 1. Pairwise forces are zeroed for |q_i - q_j| <= r_cutoff.
// Throws DivergenceError if the state becomes non-finite.
GeodesicTrajectory evolve(const Points &q0, const Points &p0, const KernelSpec &spec, int steps = kDefaultSteps);

// Endpoint-only variant of evolve(); does not record the path.
Points shoot_positions(const Points &q0, const Points &p0, const GreenKernel &kernel, int steps);

LandmarkTemplate exp_map(const LandmarkTemplate &base, const MomentumField &p0, const KernelSpec &spec,
                         int steps = kDefaultSteps);

// u(x) = sum_j G(|x - q_j|) p_j
Vec2 velocity_field(const Points &q, const Points &p, const Vec2 &x, const KernelSpec &spec);

// Nodal velocities u_i = sum_j G_ij p_j.
Points momentum_to_velocity(const Points &q, const Points &p, const KernelSpec &spec);

// Solves G p = u per coordinate with an SPD factorisation; near-singular Gram matrices get
// progressive diagonal jitter 1e-12 G(0) 2^k (k <= 8). Throws ConversionError when landmarks
// coincide or the factorisation still fails.
Points velocity_to_momentum(const Points &q, const Points &u, const KernelSpec &spec);
Points velocity_to_momentum(const Points &q, const Points &u, const GreenKernel &kernel);

// H = 1/2 sum_ij (p_i . p_j) G(|q_i - q_j|), diagonal terms included.
double hamiltonian(const Points &q, const Points &p, const KernelSpec &spec);
double hamiltonian(const Points &q, const Points &p, const GreenKernel &kernel);

// ||u||_L^2 = sum_ij (p_i . p_j) G_ij = 2 H
double sobolev_norm_sq(const Points &q, const Points &p, const KernelSpec &spec);
double sobolev_norm_sq(const Points &q, const Points &p, const GreenKernel &kernel);

// First-order geodesic distance from the tangent norm: d(I0, I1) ~ ||u01||_L.
inline double distance_estimate(double u_norm) { return u_norm; }

} // namespace lmm
