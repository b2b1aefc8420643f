#include "lmm/types.hpp"

#include "lmm/errors.hpp"

#include <cmath>

namespace lmm {

void validate(const LandmarkTemplate &t) {
    if (t.points.rows() < 1) {
        throw ParameterError("landmark template '" + t.label + "' is empty");
    }
    if (!t.points.allFinite()) {
        throw ParameterError("landmark template '" + t.label + "' has non-finite coordinates");
    }
}

void validate(const MomentumField &m) {
    validate(m.base);
    if (m.momenta.rows() != m.base.points.rows()) {
        throw ParameterError("momentum field length does not match its base template");
    }
    if (!m.momenta.allFinite()) {
        throw ParameterError("momentum field has non-finite entries");
    }
}

double rms_distance(const Points &a, const Points &b) {
    if (a.rows() != b.rows()) {
        throw ParameterError("rms_distance: landmark counts differ");
    }
    if (a.rows() == 0) {
        return 0.0;
    }
    return std::sqrt((a - b).rowwise().squaredNorm().sum() / static_cast<double>(a.rows()));
}

double diameter(const Points &p) {
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < p.rows(); ++j) {
            d2 = std::max(d2, (p.row(i) - p.row(j)).squaredNorm());
        }
    }
    return std::sqrt(d2);
}

} // namespace lmm
