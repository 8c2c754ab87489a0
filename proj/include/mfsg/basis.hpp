#pragma once

#include <mfsg/types.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfsg {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

/**
 * B-spline basis on a closed interval with clamped uniform knots.
 *
 * Holds the L2 Gram matrix of the basis functions and the Gram matrix of
 * their second derivatives, both integrated exactly by Gauss-Legendre
 * quadrature on every knot span. Immutable after construction.
 */
class BasisSystem {
public:
    BasisSystem(Interval domain, int order, int num_functions);

    const Interval& domain() const { return domain_; }
    int order() const { return order_; }
    int num_functions() const { return num_functions_; }
    const std::vector<double>& knots() const { return knots_; }
    const Matrix& gram() const { return gram_; }
    const Matrix& curvature_gram() const { return curvature_gram_; }

    bool contains(double t) const;

    // Index of the knot span [knots[s], knots[s+1]) holding t; the right
    // endpoint belongs to the last nonempty span.
    int find_span(double t) const;

    // Values of derivatives 0..max_deriv of the `order` nonzero basis
    // functions at t. Row d holds derivative d for functions
    // span-order+1 .. span.
    Matrix local_derivatives(double t, int span, int max_deriv) const;

    bool operator==(const BasisSystem& other) const;

private:
    Interval domain_;
    int order_;
    int num_functions_;
    std::vector<double> knots_;
    Matrix gram_;
    Matrix curvature_gram_;
};

BasisSystem make_bspline_basis(Interval domain, int order, int num_functions);

// T x m matrix of basis values (or their `deriv`-th derivatives) on a grid.
Matrix eval_basis(const BasisSystem& basis, std::span<const double> t, int deriv = 0);

// Evaluate the function with coordinates `coef` on a grid.
Vector eval_curve(const BasisSystem& basis, const Eigen::Ref<const Vector>& coef,
                  std::span<const double> t, int deriv = 0);

// Least-squares fit onto a fixed observation grid; the factorization is
// reused across every curve sampled on that grid.
class CurveProjector {
public:
    CurveProjector(const BasisSystem& basis, std::span<const double> t, std::string_view label = {});

    Vector project(std::span<const double> values) const;
    const std::vector<double>& grid() const { return grid_; }

private:
    std::string label_;
    std::vector<double> grid_;
    Eigen::ColPivHouseholderQR<Matrix> qr_;
};

// Least-squares coordinates of sampled curve values. `label` names the
// predictor in error messages.
Vector project_curve(const BasisSystem& basis, std::span<const double> t,
                     std::span<const double> values, std::string_view label = {});

// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
QuadratureRule gauss_legendre(int points);

} // namespace mfsg
