#pragma once

#include <mfsg/types.hpp>

namespace mfsg {

/// Block soft threshold: argmin_x 0.5*||x - y||^2 + lam*||x||.
/// Returns exactly zero when ||y|| <= lam.
Vector soft_threshold(const Eigen::Ref<const Vector>& y, double lam);

/// argmin_x 0.5*||x - y||^2 + a*||x|| + (b/2)*||x||^2, i.e. S_a(y) / (1 + b).
Vector elastic_soft_threshold(const Eigen::Ref<const Vector>& y, double a, double b);

/// Scalar shrink factor applied by soft_threshold (0 when annihilated).
double soft_threshold_factor(double norm, double lam);

} // namespace mfsg
