#include "lmm/geodesic.hpp"

#include "lmm/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <sstream>

namespace lmm {
namespace {

void check_shapes(const Points &q, const Points &p) {
    if (q.rows() != p.rows()) {
        throw ParameterError("positions and momenta have different landmark counts");
    }
    if (q.rows() < 1) {
        throw ParameterError("particle system needs at least one landmark");
    }
}

// Right-hand side of the particle system.
void particle_rates(const Points &q, const Points &p, const GreenKernel &kernel, Points &dq, Points &dp) {
    const Eigen::Index n = q.rows();
    const double g0 = kernel.at_zero();
    const double cutoff = kernel.spec().cutoff_radius();
    dq = g0 * p;
    dp.setZero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double qix = q(i, 0), qiy = q(i, 1);
        const double pix = p(i, 0), piy = p(i, 1);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dx = qix - q(j, 0);
            const double dy = qiy - q(j, 1);
            const double r = std::sqrt(dx * dx + dy * dy);
            const double g = kernel.value(r);
            dq(i, 0) += g * p(j, 0);
            dq(i, 1) += g * p(j, 1);
            dq(j, 0) += g * pix;
            dq(j, 1) += g * piy;
            if (r > cutoff) {
                const double s = (pix * p(j, 0) + piy * p(j, 1)) * kernel.derivative_unchecked(r) / r;
                dp(i, 0) -= s * dx;
                dp(i, 1) -= s * dy;
                dp(j, 0) += s * dx;
                dp(j, 1) += s * dy;
            }
        }
    }
}

struct Rk4Workspace {
    Points k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p, tq, tp;
};

void check_finite(const Points &q, const Points &p, double t) {
    if (!q.allFinite() || !p.allFinite()) {
        std::ostringstream os;
        os << "particle system diverged at t = " << t;
        throw DivergenceError(os.str(), t);
    }
}

// One step from time t; stage states are checked so an overflow never reaches the kernel.
void rk4_step(Points &q, Points &p, double t, double dt, const GreenKernel &kernel, Rk4Workspace &w) {
    particle_rates(q, p, kernel, w.k1q, w.k1p);
    w.tq = q + 0.5 * dt * w.k1q;
    w.tp = p + 0.5 * dt * w.k1p;
    check_finite(w.tq, w.tp, t);
    particle_rates(w.tq, w.tp, kernel, w.k2q, w.k2p);
    w.tq = q + 0.5 * dt * w.k2q;
    w.tp = p + 0.5 * dt * w.k2p;
    check_finite(w.tq, w.tp, t);
    particle_rates(w.tq, w.tp, kernel, w.k3q, w.k3p);
    w.tq = q + dt * w.k3q;
    w.tp = p + dt * w.k3p;
    check_finite(w.tq, w.tp, t);
    particle_rates(w.tq, w.tp, kernel, w.k4q, w.k4p);
    q += dt / 6.0 * (w.k1q + 2.0 * w.k2q + 2.0 * w.k3q + w.k4q);
    p += dt / 6.0 * (w.k1p + 2.0 * w.k2p + 2.0 * w.k3p + w.k4p);
}

void check_steps(int steps) {
    if (steps < 1) {
        throw ParameterError("integrator needs at least one step");
    }
}

} // namespace

GeodesicTrajectory evolve(const Points &q0, const Points &p0, const KernelSpec &spec, int steps) {
    check_shapes(q0, p0);
    check_steps(steps);
    const GreenKernel kernel(spec);
    GeodesicTrajectory traj;
    traj.times.reserve(steps + 1);
    traj.positions.reserve(steps + 1);
    traj.momenta.reserve(steps + 1);
    traj.hamiltonian_samples.reserve(steps + 1);

    Points q = q0;
    Points p = p0;
    check_finite(q, p, 0.0);
    const double dt = 1.0 / steps;
    Rk4Workspace w;
    traj.times.push_back(0.0);
    traj.positions.push_back(q);
    traj.momenta.push_back(p);
    traj.hamiltonian_samples.push_back(hamiltonian(q, p, kernel));
    for (int s = 1; s <= steps; ++s) {
        rk4_step(q, p, (s - 1) * dt, dt, kernel, w);
        const double t = s == steps ? 1.0 : s * dt;
        check_finite(q, p, t);
        traj.times.push_back(t);
        traj.positions.push_back(q);
        traj.momenta.push_back(p);
        traj.hamiltonian_samples.push_back(hamiltonian(q, p, kernel));
    }
    return traj;
}

Points shoot_positions(const Points &q0, const Points &p0, const GreenKernel &kernel, int steps) {
    check_shapes(q0, p0);
    check_steps(steps);
    Points q = q0;
    Points p = p0;
    check_finite(q, p, 0.0);
    if (p.isZero(0.0)) {
        return q;
    }
    const double dt = 1.0 / steps;
    Rk4Workspace w;
    for (int s = 1; s <= steps; ++s) {
        rk4_step(q, p, (s - 1) * dt, dt, kernel, w);
        check_finite(q, p, s == steps ? 1.0 : s * dt);
    }
    return q;
}

LandmarkTemplate exp_map(const LandmarkTemplate &base, const MomentumField &p0, const KernelSpec &spec, int steps) {
    validate(base);
    validate(p0);
    if (p0.base.points != base.points) {
        throw ParameterError("exp_map: momentum field is attached to a different template");
    }
    return {shoot_positions(base.points, p0.momenta, GreenKernel(spec), steps), base.label};
}

Vec2 velocity_field(const Points &q, const Points &p, const Vec2 &x, const KernelSpec &spec) {
    check_shapes(q, p);
    const GreenKernel kernel(spec);
    Vec2 u = Vec2::Zero();
    for (Eigen::Index j = 0; j < q.rows(); ++j) {
        u += kernel.value((x - q.row(j).transpose()).norm()) * p.row(j).transpose();
    }
    return u;
}

Points momentum_to_velocity(const Points &q, const Points &p, const KernelSpec &spec) {
    check_shapes(q, p);
    return gram_matrix(q, spec) * p;
}

Points velocity_to_momentum(const Points &q, const Points &u, const GreenKernel &kernel) {
    check_shapes(q, u);
    const double cutoff = kernel.spec().cutoff_radius();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < q.rows(); ++j) {
            if ((q.row(i) - q.row(j)).norm() <= cutoff) {
                std::ostringstream os;
                os << "velocity_to_momentum: landmarks " << i + 1 << " and " << j + 1
                   << " coincide; Gram matrix is rank deficient";
                throw ConversionError(os.str(), std::numeric_limits<double>::infinity());
            }
        }
    }
    const Eigen::MatrixXd g = gram_matrix(q, kernel);
    const double g0 = kernel.at_zero();
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    double condition = std::numeric_limits<double>::infinity();
    for (int k = -1; k <= 8; ++k) {
        if (k >= 0) {
            const double jitter = 1e-12 * g0 * std::ldexp(1.0, k);
            llt.compute(g + jitter * Eigen::MatrixXd::Identity(g.rows(), g.cols()));
        }
        if (llt.info() == Eigen::Success) {
            const double rc = llt.rcond();
            condition = rc > 0.0 ? 1.0 / rc : condition;
            Points p = llt.solve(u);
            // one step of refinement against the unjittered matrix
            p += llt.solve(u - g * p);
            if (p.allFinite()) {
                return p;
            }
        }
    }
    std::ostringstream os;
    os << "velocity_to_momentum: Gram matrix is numerically singular (condition estimate " << condition << ")";
    throw ConversionError(os.str(), condition);
}

Points velocity_to_momentum(const Points &q, const Points &u, const KernelSpec &spec) {
    return velocity_to_momentum(q, u, GreenKernel(spec));
}

double sobolev_norm_sq(const Points &q, const Points &p, const GreenKernel &kernel) {
    check_shapes(q, p);
    const Eigen::Index n = q.rows();
    double s = kernel.at_zero() * p.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            s += 2.0 * p.row(i).dot(p.row(j)) * kernel.value((q.row(i) - q.row(j)).norm());
        }
    }
    return s;
}

double sobolev_norm_sq(const Points &q, const Points &p, const KernelSpec &spec) {
    return sobolev_norm_sq(q, p, GreenKernel(spec));
}

double hamiltonian(const Points &q, const Points &p, const GreenKernel &kernel) {
    return 0.5 * sobolev_norm_sq(q, p, kernel);
}

double hamiltonian(const Points &q, const Points &p, const KernelSpec &spec) {
    return hamiltonian(q, p, GreenKernel(spec));
}

} // namespace lmm
