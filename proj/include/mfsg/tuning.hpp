#pragma once

#include <mfsg/admm.hpp>
#include <mfsg/dataset.hpp>
#include <mfsg/gmd.hpp>
#include <mfsg/model.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mfsg {

enum class Solver { admm, gmd };

std::string to_string(Solver solver);
Solver parse_solver(const std::string& name);

// {0} followed by six log-spaced values from 1e-8 to 1.
std::vector<double> default_lam_der_grid();

/**
 * Cross-validation net. Every (alpha, lambda_der) pair gets its own lambda
 * grid; alpha = 1 is tuned as a ridge penalty through direct solves.
 */
struct CvPlan {
    int folds = 5;
    std::vector<double> alpha_grid{0.0};
    std::vector<double> lam_der_grid = default_lam_der_grid();
    int lam_grid_size = 100;
    double lambda_min_ratio = 0.01;  // GMD grid: lambda^(1) down to this fraction
    std::uint64_t seed = 1;
    int threads = 1;
    bool one_se = false;  // pick the largest lambda within one SE of the minimum

    double admm_rho = 1.0;
    int admm_max_iter = 1000;
    GmdOptions gmd;

    void validate(Index n) const;
};

// Fold id (0..k-1) per sample from a seeded permutation; sizes differ by <= 1.
std::vector<int> make_folds(Index n, int k, std::uint64_t seed);

// Log-spaced decreasing grid over [0.9 min_j, 1.1 max_j] of the block norms of
// the ADMM ridge start (rho, lambda_der) on orthogonalized data.
std::vector<double> lambda_grid_admm(const Orthogonalized& ortho, const Matrix& g2,
                                     double lambda_der, int size, double rho = 1.0);

// Ridge grid (per-sample scale) derived from the top eigenvalue of the normal matrix.
std::vector<double> ridge_grid(const QuadraticSolver& solver, int size);

struct CvPoint {
    double alpha = 0.0;
    double lambda_der = 0.0;
    std::vector<double> lambdas;   // decreasing
    std::vector<double> mean_mse;  // averaged over the folds used
    std::vector<double> se_mse;    // standard error across folds
};

struct CvResult {
    Solver solver = Solver::gmd;
    PenaltyParams best;
    double best_error = 0.0;
    std::vector<CvPoint> surface;
    std::vector<int> fold_ids;
    std::vector<int> skipped_folds;
    FitResult fit;  // refit on all samples at `best`
    std::vector<std::string> warnings;
};

// `data` is raw (uncentered); each training fold is centered on its own.
CvResult cross_validate(const FunctionalDataset& data, const CvPlan& plan, Solver solver);
CvResult cross_validate(const FunctionalDataset& data, const CvPlan& plan, Solver solver,
                        const std::vector<int>& fold_ids);

// Fit at fixed parameters with the chosen solver (warm path down to lambda).
FitResult fit_penalized(const FunctionalDataset& data, const PenaltyParams& params, Solver solver,
                        const CvPlan& plan = {});

FitResult fit_ols(const FunctionalDataset& data);
FitResult fit_ridge(const FunctionalDataset& data, double ridge, double lambda_der = 0.0);
FitResult fit_oracle(const FunctionalDataset& data, const IndexSet& active);

struct Baselines {
    FitResult ols;
    FitResult ridge;
    FitResult oracle;
    CvResult ridge_cv;
};

// OLS, CV-tuned ridge and the oracle OLS on `true_active`.
Baselines baselines(const FunctionalDataset& data, const IndexSet& true_active,
                    const CvPlan& plan = {});

} // namespace mfsg
