#pragma once

#include <mfsg/dataset.hpp>
#include <mfsg/model.hpp>

#include <optional>

namespace mfsg {

struct AdmmConfig {
    double lambda = 0.0;
    double alpha = 0.0;
    double lambda_der = 0.0;
    double rho = 1.0;
    int max_iter = 1000;
    double tol_abs = 1e-6;
    double tol_rel = 1e-4;

    PenaltyParams penalty() const { return {lambda, alpha, lambda_der}; }
    void validate() const;
};

// Scaled-form iterate; u is the dual variable divided by rho.
struct AdmmState {
    Vector beta;
    Vector gamma;
    Vector u;
    double rho = 1.0;
    int iteration = 0;
};

/// Cholesky factor of Xc Xc^T + n rho I + lambda_der G''. Depends only on
/// (rho, lambda_der), so one factor serves a whole lambda grid.
class AdmmFactor {
public:
    AdmmFactor(const FunctionalDataset& ortho, const Matrix& g2, double rho, double lambda_der);

    Vector solve(const Eigen::Ref<const Vector>& rhs) const { return llt_.solve(rhs); }
    const Vector& xy() const { return xy_; }
    double rho() const { return rho_; }
    double lambda_der() const { return lambda_der_; }
    Index num_samples() const { return n_; }
    const BlockLayout& layout() const { return layout_; }

private:
    Eigen::LLT<Matrix> llt_;
    Vector xy_;
    double rho_;
    double lambda_der_;
    Index n_;
    BlockLayout layout_;
};

AdmmFactor admm_factorize(const FunctionalDataset& ortho, const Matrix& g2, double rho,
                          double lambda_der);

struct AdmmSolution {
    AdmmState state;
    IndexSet active_set;
    bool converged = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

// Iterate in orthonormal coordinates; `warm` continues from a previous state
// (must share rho), otherwise gamma = u = 0.
AdmmSolution admm_solve(const AdmmFactor& factor, const AdmmConfig& cfg,
                        const AdmmState* warm = nullptr);

// Full fit on an orthogonalized dataset; coefficients mapped back to the
// original basis. The returned estimate is gamma (exactly sparse).
FitResult admm_fit(const Orthogonalized& ortho, const Matrix& g2, const AdmmConfig& cfg);

// Convenience: center, orthogonalize, build G'' and fit.
FitResult admm_fit(const FunctionalDataset& data, const AdmmConfig& cfg);

} // namespace mfsg
