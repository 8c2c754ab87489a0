#pragma once

#include <mfsg/dataset.hpp>
#include <mfsg/model.hpp>

#include <optional>
#include <vector>

namespace mfsg {

// How the H-norm penalty is reconciled with the Euclidean block threshold.
enum class GmdVariant {
    whitened,  // blocks work in theta^j = R_j b^j with G_j = R_j^T R_j (exact)
    literal    // threshold raw coordinates as printed; penalizes ||b^j||_2
};

struct GmdOptions {
    bool strong_rule = true;
    double coef_tol = 1e-7;   // relative coefficient change per sweep
    double obj_tol = 1e-9;    // relative objective change per sweep; <= 0 disables
    int max_sweeps = 200000;  // per inner solve
    int max_outer = 100;      // KKT repair rounds
    double kkt_tol = 1e-10;   // relative slack on the KKT inequality
    bool trace_objective = false;
};

/**
 * Quadratic pieces of the unscaled loss
 *   L(b) = 0.5 ||Y - Xc^T G b||^2 + 0.5 lambda_der b^T B'' b
 * in the original basis, plus the same quantities expressed in the working
 * coordinates the block updates operate on.
 */
struct GmdProblem {
    BlockLayout layout;
    Index n = 0;
    Matrix xtilde;        // M x n centered coordinates
    Vector y;             // centered response
    Matrix gram;          // block-diagonal G
    Matrix curvature;     // block-diagonal B''
    double lambda_der = 0.0;
    Matrix h_majorizer;   // G Xc Xc^T G + lambda_der B''
    Vector eta;           // largest eigenvalue of each diagonal block of h_majorizer
    Vector gamma;         // (1 + eps) eta
    double eps_star = 1e-6;

    GmdVariant variant = GmdVariant::whitened;
    std::vector<Matrix> whiten;    // R_j (identity for the literal variant)
    std::vector<Matrix> unwhiten;  // R_j^{-1}
    Matrix h_work;        // R^-T H R^-1
    Vector b_work;        // R^-T G Xc Y
    double yy = 0.0;
    Vector eta_work;
    Vector gamma_work;    // majorization constants used by the updates
    std::vector<Index> degenerate;  // blocks with zero curvature

    Vector to_work(const Eigen::Ref<const Vector>& beta) const;
    Vector to_original(const Eigen::Ref<const Vector>& theta) const;
};

GmdProblem make_gmd_problem(const FunctionalDataset& centered, double lambda_der,
                            GmdVariant variant = GmdVariant::whitened);

double gmd_loss(const GmdProblem& problem, const Eigen::Ref<const Vector>& beta);

// G Xc (Xc^T G b - Y) + lambda_der B'' b.
Vector gmd_gradient(const GmdProblem& problem, const Eigen::Ref<const Vector>& beta);

// Closed-form minimizer of the block surrogate:
// (1 / (2 alpha lam + gamma_j)) S_{lam (1 - alpha)}(U^j + gamma_j old^j).
// `lam` is on the unscaled (sum-of-squares) scale.
Vector gmd_block_step(const Eigen::Ref<const Vector>& neg_grad_block,
                      const Eigen::Ref<const Vector>& old_block, double gamma_j, double lam,
                      double alpha);

// One block update from working coordinates theta; returns the new theta^j.
Vector gmd_block_update(const GmdProblem& problem, const Eigen::Ref<const Vector>& theta, Index j,
                        double lam, double alpha);

// Largest lambda (per-sample scale) with an all-zero solution.
double gmd_lambda_max(const GmdProblem& problem, double alpha);

struct GmdSolution {
    Vector theta;          // working coordinates
    Vector coefficients;   // original basis
    IndexSet active_set;
    IndexSet strong_set;
    bool converged = false;
    bool kkt_passed = false;
    int sweeps = 0;
    int outer_rounds = 0;
    double objective = 0.0;  // per-sample scale
    std::vector<double> objective_trace;  // after each block update, if requested
};

// Solve at one lambda (per-sample scale). `prev_lambda` enables the
// sequential strong rule relative to the warm start's lambda.
GmdSolution gmd_solve_at(const GmdProblem& problem, double lambda, double alpha,
                         const Vector* warm_beta = nullptr, const IndexSet& active_hint = {},
                         std::optional<double> prev_lambda = std::nullopt,
                         const GmdOptions& options = {});

struct LambdaPath {
    std::vector<double> lambdas;  // per-sample scale, strictly decreasing
    std::vector<Vector> coefficients;
    std::vector<IndexSet> active_sets;
    std::vector<bool> converged;
    std::vector<bool> kkt_passed;
    std::vector<int> iterations;
};

LambdaPath gmd_path(const GmdProblem& problem, double alpha, int num_lambdas = 100,
                    double lambda_min_ratio = 0.01, const GmdOptions& options = {});

// Warm-started path over a caller-supplied decreasing grid.
LambdaPath gmd_path_on_grid(const GmdProblem& problem, double alpha,
                            const std::vector<double>& lambdas, const GmdOptions& options = {});

std::vector<double> geometric_grid(double hi, double lo, int count);

// Single fit; alpha = 1 or lambda = 0 dispatch to a direct solve.
FitResult gmd_fit(const FunctionalDataset& data, const PenaltyParams& params,
                  const GmdOptions& options = {}, GmdVariant variant = GmdVariant::whitened);

} // namespace mfsg
