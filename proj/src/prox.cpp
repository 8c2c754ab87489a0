#include <mfsg/error.hpp>
#include <mfsg/prox.hpp>

#include <cmath>

namespace mfsg {

double soft_threshold_factor(double norm, double lam)
{
    if (!(norm > lam)) return 0.0;
    return 1.0 - lam / norm;
}

Vector soft_threshold(const Eigen::Ref<const Vector>& y, double lam)
{
    if (!(lam >= 0.0)) throw ConfigError("soft_threshold: threshold must be nonnegative");
    const double factor = soft_threshold_factor(y.norm(), lam);
    if (factor == 0.0) return Vector::Zero(y.size());
    return factor * y;
}

Vector elastic_soft_threshold(const Eigen::Ref<const Vector>& y, double a, double b)
{
    if (!(a >= 0.0) || !(b >= 0.0)) {
        throw ConfigError("elastic_soft_threshold: a and b must be nonnegative");
    }
    Vector out = soft_threshold(y, a);
    out /= (1.0 + b);
    return out;
}

} // namespace mfsg
