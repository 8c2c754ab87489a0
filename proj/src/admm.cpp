#include <mfsg/admm.hpp>
#include <mfsg/error.hpp>
#include <mfsg/prox.hpp>

#include <cmath>

namespace mfsg {

void AdmmConfig::validate() const
{
    penalty().validate();
    if (!(rho > 0.0)) throw ConfigError("ADMM rho must be > 0");
    if (max_iter < 1) throw ConfigError("ADMM max_iter must be >= 1");
    if (!(tol_abs >= 0.0) || !(tol_rel >= 0.0)) throw ConfigError("ADMM tolerances must be >= 0");
}

AdmmFactor::AdmmFactor(const FunctionalDataset& ortho, const Matrix& g2, double rho,
                       double lambda_der)
    : rho_(rho), lambda_der_(lambda_der), n_(ortho.num_samples()), layout_(ortho.layout())
{
    if (ortho.system != CoordinateSystem::orthonormal || !ortho.centered) {
        throw ConfigError("ADMM requires a centered, orthogonalized dataset");
    }
    if (!(rho > 0.0)) throw ConfigError("ADMM rho must be > 0");
    const Index total = layout_.total();
    if (g2.rows() != total || g2.cols() != total) throw ConfigError("G'' has the wrong shape");
    Matrix system = ortho.coords * ortho.coords.transpose();
    system.diagonal().array() += static_cast<double>(n_) * rho;
    if (lambda_der > 0.0) system.noalias() += lambda_der * g2;
    llt_.compute(system);
    if (llt_.info() != Eigen::Success) throw NumericalError("ADMM system factorization failed");
    xy_ = ortho.coords * ortho.response;
}

AdmmFactor admm_factorize(const FunctionalDataset& ortho, const Matrix& g2, double rho,
                          double lambda_der)
{
    return AdmmFactor(ortho, g2, rho, lambda_der);
}

AdmmSolution admm_solve(const AdmmFactor& factor, const AdmmConfig& cfg, const AdmmState* warm)
{
    cfg.validate();
    if (cfg.rho != factor.rho() || cfg.lambda_der != factor.lambda_der()) {
        throw ConfigError("ADMM factor was built for a different (rho, lambda_der)");
    }
    const BlockLayout& lay = factor.layout();
    const Index total = lay.total();
    const double nrho = static_cast<double>(factor.num_samples()) * cfg.rho;
    const double threshold = cfg.lambda * (1.0 - cfg.alpha) / cfg.rho;
    const double shrink = cfg.rho / (cfg.rho + 2.0 * cfg.alpha * cfg.lambda);
    const double sqrt_total = std::sqrt(static_cast<double>(total));

    AdmmSolution sol;
    AdmmState& st = sol.state;
    if (warm) {
        st = *warm;
        st.iteration = 0;
    } else {
        st.beta = Vector::Zero(total);
        st.gamma = Vector::Zero(total);
        st.u = Vector::Zero(total);
    }
    st.rho = cfg.rho;

    Vector gamma_old(total);
    for (int it = 0; it < cfg.max_iter; ++it) {
        st.beta = factor.solve(factor.xy() + nrho * (st.gamma - st.u));
        gamma_old = st.gamma;
        for (Index j = 0; j < lay.num_blocks; ++j) {
            const Vector v = lay.block(st.beta, j) + lay.block(st.u, j);
            const double f = soft_threshold_factor(v.norm(), threshold);
            if (f == 0.0) lay.block(st.gamma, j).setZero();
            else lay.block(st.gamma, j) = (shrink * f) * v;
        }
        st.u += st.beta - st.gamma;
        st.iteration = it + 1;

        sol.primal_residual = (st.beta - st.gamma).norm();
        sol.dual_residual = cfg.rho * (st.gamma - gamma_old).norm();
        const double eps_pri =
            sqrt_total * cfg.tol_abs + cfg.tol_rel * std::max(st.beta.norm(), st.gamma.norm());
        const double eps_dual = sqrt_total * cfg.tol_abs + cfg.tol_rel * cfg.rho * st.u.norm();
        if (sol.primal_residual <= eps_pri && sol.dual_residual <= eps_dual) {
            sol.converged = true;
            break;
        }
    }
    sol.active_set = nonzero_blocks(st.gamma, lay);
    return sol;
}

FitResult admm_fit(const Orthogonalized& ortho, const Matrix& g2, const AdmmConfig& cfg)
{
    const AdmmFactor factor(ortho.data, g2, cfg.rho, cfg.lambda_der);
    const AdmmSolution sol = admm_solve(factor, cfg);
    Vector coef = to_original_coordinates(ortho.transform, sol.state.gamma);
    // Inactive blocks must stay exactly zero after the change of basis.
    const BlockLayout lay = ortho.data.layout();
    for (Index j = 0; j < lay.num_blocks; ++j) {
        if ((lay.block(sol.state.gamma, j).array() == 0.0).all()) lay.block(coef, j).setZero();
    }
    FitResult fit;
    fit.bases = ortho.data.bases;
    fit.predictor_names = ortho.data.predictor_names;
    fit.coord_means = ortho.data.coord_means;
    fit.response_mean = ortho.data.response_mean;
    fit.params = cfg.penalty();
    fit.solver = "admm";
    fit.penalty = cfg.alpha == 0.0 ? "lasso" : "elastic-net";
    fit.active_set = sol.active_set;
    fit.converged = sol.converged;
    fit.iterations = sol.state.iteration;
    // Objective in the orthonormal system equals the original-basis one.
    {
        const double n = static_cast<double>(ortho.data.num_samples());
        const Vector& g = sol.state.gamma;
        const Vector resid = ortho.data.response - ortho.data.coords.transpose() * g;
        double group = 0.0, squared = 0.0;
        for (Index j = 0; j < lay.num_blocks; ++j) {
            const double sq = lay.block(g, j).squaredNorm();
            group += std::sqrt(sq);
            squared += sq;
        }
        const double curvature = cfg.lambda_der > 0.0 ? g.dot(g2 * g) : 0.0;
        fit.objective = (0.5 * resid.squaredNorm() + 0.5 * cfg.lambda_der * curvature) / n +
                        cfg.lambda * (1.0 - cfg.alpha) * group + cfg.alpha * cfg.lambda * squared;
    }
    fit.coefficients = std::move(coef);
    if (!sol.converged) {
        fit.warnings.push_back("ADMM reached max_iter=" + std::to_string(cfg.max_iter) +
                               " without meeting the residual tolerances");
    }
    return fit;
}

FitResult admm_fit(const FunctionalDataset& data, const AdmmConfig& cfg)
{
    const FunctionalDataset centered = data.centered ? data : center(data);
    const Orthogonalized ortho = orthogonalize(centered);
    const Matrix g2 = block_curvature_gram_ortho(ortho.transform, centered.bases);
    return admm_fit(ortho, g2, cfg);
}

} // namespace mfsg
