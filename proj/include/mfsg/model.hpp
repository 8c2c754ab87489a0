#pragma once

#include <mfsg/dataset.hpp>
#include <mfsg/types.hpp>

#include <string>
#include <vector>

namespace mfsg {

/**
 * Penalty parameters on the per-sample scale:
 *
 *   (1/n) [ 0.5 ||Y - Xc^T G b||^2 + 0.5 lambda_der b^T B'' b ]
 *     + lambda (1 - alpha) sum_j ||b^j||_H + alpha lambda sum_j ||b^j||_H^2
 *
 * alpha = 0 is the functional group lasso, alpha = 1 a ridge penalty.
 */
struct PenaltyParams {
    double lambda = 0.0;
    double alpha = 0.0;
    double lambda_der = 0.0;

    void validate() const;
};

/// Fitted scalar-on-function model; coefficients are always stored in the
/// original B-spline coordinates.
struct FitResult {
    std::vector<BasisSystem> bases;
    std::vector<std::string> predictor_names;
    Vector coefficients;
    IndexSet active_set;
    Vector coord_means;
    double response_mean = 0.0;
    PenaltyParams params;
    std::string solver;
    std::string penalty;
    bool converged = true;
    bool rank_deficient = false;  // direct solve fell back to minimum norm
    int iterations = 0;
    double objective = 0.0;
    std::vector<std::string> warnings;

    BlockLayout layout() const;
    Vector block_norms() const;  // ||b^j||_H = sqrt(b^T G^j b)
    Vector coefficient_block(Index j) const;

    // y_hat = response_mean + sum_j b^j^T G^j (x^j - mean^j) for each column.
    Vector predict(const Matrix& raw_coords) const;
    Vector predict(const FunctionalDataset& data) const;
};

// Penalized objective above, evaluated on centered data in original coordinates.
double penalized_objective(const FunctionalDataset& centered, const Eigen::Ref<const Vector>& coef,
                           const PenaltyParams& params);

// Indices of blocks that are not identically zero.
IndexSet nonzero_blocks(const Eigen::Ref<const Vector>& coef, const BlockLayout& layout);

double rmse(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& observed);

/// Solution of the purely quadratic problem (lambda(1-alpha) term absent):
/// (G Xc Xc^T G + lambda_der B'' + 2 n ridge G) b = G Xc Y.
/// Singular systems fall back to the minimum-H-norm solution and set
/// `rank_deficient`.
struct DirectSolution {
    Vector coefficients;
    Index rank = 0;
    bool rank_deficient = false;
};

// Eigendecomposes the whitened normal matrix once so a whole ridge grid can
// be solved cheaply.
class QuadraticSolver {
public:
    QuadraticSolver(const FunctionalDataset& centered, double lambda_der,
                    const IndexSet& restrict_to = {});

    DirectSolution solve(double ridge) const;
    Index num_samples() const { return n_; }
    // Largest eigenvalue of the whitened normal matrix (unscaled).
    double top_eigenvalue() const { return eigvals_.size() ? eigvals_.maxCoeff() : 0.0; }

private:
    BlockLayout layout_;
    Index n_ = 0;
    IndexSet blocks_;
    std::vector<Matrix> chol_inv_;  // R_j^{-1}, G_j = R_j^T R_j
    Matrix eigvecs_;
    Vector eigvals_;
    Vector rhs_;                    // whitened right-hand side
};

DirectSolution direct_solve(const FunctionalDataset& centered, double ridge, double lambda_der,
                            const IndexSet& restrict_to = {});

// Populate the bookkeeping fields of a FitResult from a centered dataset.
FitResult make_fit_result(const FunctionalDataset& centered, Vector coefficients,
                          const PenaltyParams& params, std::string solver, std::string penalty);

} // namespace mfsg
