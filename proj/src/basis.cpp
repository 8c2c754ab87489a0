#include <mfsg/basis.hpp>
#include <mfsg/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace mfsg {

QuadratureRule gauss_legendre(int points)
{
    if (points < 1) throw ConfigError("gauss_legendre: need at least one point");
    QuadratureRule rule;
    rule.nodes.resize(points);
    rule.weights.resize(points);
    const int half = (points + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= points; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = points * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[points - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[points - 1 - i] = w;
    }
    return rule;
}

BasisSystem::BasisSystem(Interval domain, int order, int num_functions)
    : domain_(domain), order_(order), num_functions_(num_functions)
{
    if (order < 1) throw ConfigError("basis order must be >= 1");
    if (num_functions < order) {
        throw ConfigError("number of basis functions (" + std::to_string(num_functions) +
                          ") must be >= order (" + std::to_string(order) + ")");
    }
    if (!(domain.hi > domain.lo) || !std::isfinite(domain.lo) || !std::isfinite(domain.hi)) {
        throw ConfigError("basis domain must be a nondegenerate finite interval");
    }

    const int interior = num_functions - order;
    knots_.reserve(num_functions + order);
    for (int i = 0; i < order; ++i) knots_.push_back(domain.lo);
    for (int i = 1; i <= interior; ++i) {
        knots_.push_back(domain.lo + domain.width() * i / (interior + 1));
    }
    for (int i = 0; i < order; ++i) knots_.push_back(domain.hi);

    const int m = num_functions;
    gram_ = Matrix::Zero(m, m);
    curvature_gram_ = Matrix::Zero(m, m);
    const auto rule = gauss_legendre(order);
    const int max_deriv = order >= 3 ? 2 : 0;

    for (int span = order - 1; span < m; ++span) {
        const double u0 = knots_[span];
        const double u1 = knots_[span + 1];
        if (!(u1 > u0)) continue;
        const double half = 0.5 * (u1 - u0);
        const double mid = 0.5 * (u1 + u0);
        const int first = span - order + 1;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = mid + half * rule.nodes[q];
            const double w = half * rule.weights[q];
            const Matrix ders = local_derivatives(t, span, max_deriv);
            gram_.block(first, first, order, order).noalias() +=
                w * ders.row(0).transpose() * ders.row(0);
            if (max_deriv == 2) {
                curvature_gram_.block(first, first, order, order).noalias() +=
                    w * ders.row(2).transpose() * ders.row(2);
            }
        }
    }
    // Symmetrize away rounding asymmetry from the rank-one accumulations.
    gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
    curvature_gram_ = 0.5 * (curvature_gram_ + curvature_gram_.transpose()).eval();
}

bool BasisSystem::contains(double t) const
{
    const double slack = 1e-12 * domain_.width();
    return t >= domain_.lo - slack && t <= domain_.hi + slack;
}

int BasisSystem::find_span(double t) const
{
    const int last = num_functions_ - 1;
    if (t >= knots_[last + 1]) return last;
    if (t <= knots_[order_ - 1]) return order_ - 1;
    // Largest s with knots[s] <= t, restricted to [order-1, last].
    auto begin = knots_.begin() + (order_ - 1);
    auto end = knots_.begin() + (last + 2);
    auto it = std::upper_bound(begin, end, t);
    return static_cast<int>(it - knots_.begin()) - 1;
}

Matrix BasisSystem::local_derivatives(double t, int span, int max_deriv) const
{
    const int p = order_ - 1;
    Matrix ders = Matrix::Zero(max_deriv + 1, order_);
    // Cox-de Boor triangle with knot differences kept for the derivatives.
    Matrix ndu(order_, order_);
    std::vector<double> left(order_), right(order_);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

    const int top = std::min(max_deriv, p);
    Matrix a(2, order_);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= top; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= top; ++k) {
        ders.row(k) *= factor;
        factor *= (p - k);
    }
    return ders;
}

bool BasisSystem::operator==(const BasisSystem& other) const
{
    return domain_ == other.domain_ && order_ == other.order_ &&
           num_functions_ == other.num_functions_ && knots_ == other.knots_;
}

BasisSystem make_bspline_basis(Interval domain, int order, int num_functions)
{
    return BasisSystem(domain, order, num_functions);
}

Matrix eval_basis(const BasisSystem& basis, std::span<const double> t, int deriv)
{
    if (deriv < 0) throw ConfigError("eval_basis: derivative order must be >= 0");
    const int m = basis.num_functions();
    const int k = basis.order();
    Matrix out = Matrix::Zero(static_cast<Index>(t.size()), m);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!basis.contains(t[i])) {
            std::ostringstream msg;
            msg << "evaluation point " << t[i] << " outside basis domain ["
                << basis.domain().lo << ", " << basis.domain().hi << "]";
            throw DomainError(msg.str());
        }
        if (deriv >= k) continue;
        const double ti = std::clamp(t[i], basis.domain().lo, basis.domain().hi);
        const int span = basis.find_span(ti);
        const Matrix ders = basis.local_derivatives(ti, span, deriv);
        out.row(static_cast<Index>(i)).segment(span - k + 1, k) = ders.row(deriv);
    }
    return out;
}

Vector eval_curve(const BasisSystem& basis, const Eigen::Ref<const Vector>& coef,
                  std::span<const double> t, int deriv)
{
    if (coef.size() != basis.num_functions()) {
        throw ConfigError("eval_curve: coefficient length does not match basis size");
    }
    return eval_basis(basis, t, deriv) * coef;
}

CurveProjector::CurveProjector(const BasisSystem& basis, std::span<const double> t,
                               std::string_view label)
    : label_(label.empty() ? std::string("curve") : "predictor '" + std::string(label) + "'"),
      grid_(t.begin(), t.end())
{
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) {
            throw ConfigError("project_curve: grid for " + label_ + " is not strictly increasing");
        }
    }
    const Index m = basis.num_functions();
    if (static_cast<Index>(t.size()) < m) {
        throw NumericalError("project_curve: " + label_ + " has " + std::to_string(t.size()) +
                             " observations, fewer than the " + std::to_string(m) +
                             " basis functions");
    }
    qr_.compute(eval_basis(basis, t));
    qr_.setThreshold(1e-10);
    if (qr_.rank() < m) {
        throw NumericalError("project_curve: rank-deficient design for " + label_ + " (rank " +
                             std::to_string(qr_.rank()) + " < " + std::to_string(m) +
                             "); too few distinct points in some knot spans");
    }
}

Vector CurveProjector::project(std::span<const double> values) const
{
    if (values.size() != grid_.size()) {
        throw ConfigError("project_curve: " + label_ + " has " + std::to_string(grid_.size()) +
                          " grid points but " + std::to_string(values.size()) + " values");
    }
    const Eigen::Map<const Vector> y(values.data(), static_cast<Index>(values.size()));
    return qr_.solve(y);
}

Vector project_curve(const BasisSystem& basis, std::span<const double> t,
                     std::span<const double> values, std::string_view label)
{
    if (t.size() != values.size()) {
        const std::string who = label.empty() ? std::string("curve")
                                              : "predictor '" + std::string(label) + "'";
        throw ConfigError("project_curve: " + who + " has " + std::to_string(t.size()) +
                          " grid points but " + std::to_string(values.size()) + " values");
    }
    return CurveProjector(basis, t, label).project(values);
}

} // namespace mfsg
