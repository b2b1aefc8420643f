#pragma once

#include <string>

#include <Eigen/Core>

namespace lmm {

using Vec2 = Eigen::Vector2d;

// One row per landmark, columns (x, y).
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Ordered landmark configuration; row i of one template corresponds to row i of any other.
struct LandmarkTemplate {
    Points points;
    std::string label;

    Eigen::Index size() const { return points.rows(); }
};

// Momentum covectors attached to the landmarks of `base`.
struct MomentumField {
    Points momenta;
    LandmarkTemplate base;
};

// Throws ParameterError if empty or non-finite.
void validate(const LandmarkTemplate &t);
void validate(const MomentumField &m);

// Root mean square of per-landmark Euclidean distances.
double rms_distance(const Points &a, const Points &b);

// Largest pairwise landmark distance (0 for a single landmark).
double diameter(const Points &p);

} // namespace lmm
