#include <mfsg/error.hpp>
#include <mfsg/parallel.hpp>
#include <mfsg/tuning.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mfsg {

std::string to_string(Solver solver)
{
    return solver == Solver::admm ? "admm" : "gmd";
}

Solver parse_solver(const std::string& name)
{
    if (name == "admm") return Solver::admm;
    if (name == "gmd") return Solver::gmd;
    throw ConfigError("unknown solver '" + name + "' (expected admm or gmd)");
}

std::vector<double> default_lam_der_grid()
{
    std::vector<double> grid{0.0};
    for (int k = 0; k < 6; ++k) grid.push_back(std::pow(10.0, -8.0 + 8.0 * k / 5.0));
    return grid;
}

void CvPlan::validate(Index n) const
{
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > n) throw ConfigError("more folds than samples");
    const Index largest_fold = (n + folds - 1) / folds;
    if (n - largest_fold < 2) throw ConfigError("training folds need at least 2 samples");
    if (alpha_grid.empty() || lam_der_grid.empty()) throw ConfigError("empty tuning net");
    for (double a : alpha_grid) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha grid values must lie in [0, 1]");
    }
    for (double d : lam_der_grid) {
        if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("lambda_der grid values must be >= 0");
    }
    if (lam_grid_size < 1) throw ConfigError("lambda grid needs at least one point");
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw ConfigError("lambda_min_ratio must lie in (0, 1)");
    }
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(admm_rho > 0.0)) throw ConfigError("rho must be > 0");
}

std::vector<int> make_folds(Index n, int k, std::uint64_t seed)
{
    if (k < 2 || k > n) throw ConfigError("fold count must lie in [2, n]");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    // Fisher-Yates with explicit rejection sampling: std::shuffle is not
    // reproducible across standard libraries.
    std::mt19937_64 rng(seed);
    for (Index i = n - 1; i > 0; --i) {
        const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw;
        do {
            draw = rng();
        } while (draw >= limit);
        std::swap(perm[i], perm[draw % bound]);
    }
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (Index pos = 0; pos < n; ++pos) ids[perm[pos]] = static_cast<int>(pos % k);
    return ids;
}

std::vector<double> lambda_grid_admm(const Orthogonalized& ortho, const Matrix& g2,
                                     double lambda_der, int size, double rho)
{
    const AdmmFactor factor(ortho.data, g2, rho, lambda_der);
    const Vector ridge = factor.solve(factor.xy());
    const BlockLayout lay = factor.layout();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Index j = 0; j < lay.num_blocks; ++j) {
        const double norm = lay.block(ridge, j).norm();
        hi = std::max(hi, norm);
        if (norm > 0.0) lo = std::min(lo, norm);
    }
    if (!(hi > 0.0)) throw NumericalError("all ridge block norms are zero; degenerate data");
    return geometric_grid(1.1 * hi, 0.9 * lo, size);
}

std::vector<double> ridge_grid(const QuadraticSolver& solver, int size)
{
    const double top = solver.top_eigenvalue() / (2.0 * static_cast<double>(solver.num_samples()));
    if (!(top > 0.0)) throw NumericalError("normal matrix vanishes; degenerate data");
    return geometric_grid(top, top * 1e-8, size);
}

namespace {

std::string penalty_name(double alpha)
{
    if (alpha == 0.0) return "lasso";
    if (alpha == 1.0) return "ridge";
    return "elastic-net";
}

struct PathOutcome {
    std::vector<Vector> coefficients;
    int nonconverged = 0;
};

// Original-basis coefficients along `lambdas` (decreasing) for one centered set.
PathOutcome solve_path(const FunctionalDataset& centered, Solver solver, double alpha,
                       double lambda_der, const std::vector<double>& lambdas, const CvPlan& plan)
{
    PathOutcome out;
    if (alpha == 1.0) {
        const QuadraticSolver quad(centered, lambda_der);
        for (double lam : lambdas) out.coefficients.push_back(quad.solve(lam).coefficients);
        return out;
    }
    if (solver == Solver::gmd) {
        const GmdProblem problem = make_gmd_problem(centered, lambda_der);
        LambdaPath path = gmd_path_on_grid(problem, alpha, lambdas, plan.gmd);
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
            if (!path.converged[k] || !path.kkt_passed[k]) ++out.nonconverged;
        }
        out.coefficients = std::move(path.coefficients);
        return out;
    }
    const Orthogonalized ortho = orthogonalize(centered);
    const Matrix g2 = block_curvature_gram_ortho(ortho.transform, centered.bases);
    const AdmmFactor factor(ortho.data, g2, plan.admm_rho, lambda_der);
    AdmmConfig cfg;
    cfg.alpha = alpha;
    cfg.lambda_der = lambda_der;
    cfg.rho = plan.admm_rho;
    cfg.max_iter = plan.admm_max_iter;
    AdmmState warm;
    bool have_warm = false;
    for (double lam : lambdas) {
        cfg.lambda = lam;
        AdmmSolution sol = admm_solve(factor, cfg, have_warm ? &warm : nullptr);
        if (!sol.converged) ++out.nonconverged;
        out.coefficients.push_back(to_original_coordinates(ortho.transform, sol.state.gamma));
        warm = std::move(sol.state);
        have_warm = true;
    }
    return out;
}

std::vector<double> grid_for(const FunctionalDataset& full_centered, Solver solver, double alpha,
                             double lambda_der, const CvPlan& plan)
{
    if (alpha == 1.0) return ridge_grid(QuadraticSolver(full_centered, lambda_der), plan.lam_grid_size);
    if (solver == Solver::gmd) {
        const GmdProblem problem = make_gmd_problem(full_centered, 0.0);
        const double top = gmd_lambda_max(problem, alpha);
        if (!(top > 0.0)) throw NumericalError("all gradient blocks vanish at zero; degenerate data");
        return geometric_grid(top, top * plan.lambda_min_ratio, plan.lam_grid_size);
    }
    const Orthogonalized ortho = orthogonalize(full_centered);
    const Matrix g2 = block_curvature_gram_ortho(ortho.transform, full_centered.bases);
    return lambda_grid_admm(ortho, g2, lambda_der, plan.lam_grid_size, plan.admm_rho);
}

} // namespace

CvResult cross_validate(const FunctionalDataset& data, const CvPlan& plan, Solver solver)
{
    return cross_validate(data, plan, solver, make_folds(data.num_samples(), plan.folds, plan.seed));
}

CvResult cross_validate(const FunctionalDataset& data, const CvPlan& plan, Solver solver,
                        const std::vector<int>& fold_ids)
{
    if (data.centered || data.system != CoordinateSystem::original) {
        throw ConfigError("cross_validate expects a raw dataset");
    }
    const Index n = data.num_samples();
    plan.validate(n);
    if (static_cast<Index>(fold_ids.size()) != n) throw ConfigError("fold ids do not match samples");
    int k = 0;
    for (int f : fold_ids) {
        if (f < 0) throw ConfigError("fold ids must be >= 0");
        k = std::max(k, f + 1);
    }
    if (k < 2) throw ConfigError("cross-validation needs at least 2 folds");

    CvResult result;
    result.solver = solver;
    result.fold_ids = fold_ids;

    std::vector<std::vector<Index>> train(k), test(k);
    for (Index i = 0; i < n; ++i) {
        for (int f = 0; f < k; ++f) (fold_ids[i] == f ? test : train)[f].push_back(i);
    }
    std::vector<int> used;
    for (int f = 0; f < k; ++f) {
        bool constant = train[f].size() < 2 || test[f].empty();
        if (!constant) {
            const double first = data.response(train[f].front());
            constant = std::all_of(train[f].begin(), train[f].end(),
                                   [&](Index i) { return data.response(i) == first; });
        }
        if (constant) {
            result.skipped_folds.push_back(f);
            result.warnings.push_back("fold " + std::to_string(f) +
                                      " skipped: training response has zero variance");
        } else {
            used.push_back(f);
        }
    }
    if (used.empty()) throw NumericalError("every fold was skipped; response has zero variance");

    const FunctionalDataset full = center(data);
    for (double alpha : plan.alpha_grid) {
        for (double lam_der : plan.lam_der_grid) {
            CvPoint point;
            point.alpha = alpha;
            point.lambda_der = lam_der;
            point.lambdas = grid_for(full, solver, alpha, lam_der, plan);
            result.surface.push_back(std::move(point));
        }
    }

    const std::size_t num_points = result.surface.size();
    const std::size_t jobs = num_points * used.size();
    std::vector<std::vector<double>> mse(jobs);
    std::vector<int> nonconverged(jobs, 0);
    const Matrix gram = block_gram(data.bases);
    std::vector<FunctionalDataset> train_sets(used.size()), test_sets(used.size());
    for (std::size_t u = 0; u < used.size(); ++u) {
        train_sets[u] = center(select_samples(data, train[used[u]]));
        test_sets[u] = select_samples(data, test[used[u]]);
    }

    parallel_for(jobs, plan.threads, [&](std::size_t job) {
        const CvPoint& point = result.surface[job / used.size()];
        const std::size_t u = job % used.size();
        const FunctionalDataset& tr = train_sets[u];
        const FunctionalDataset& te = test_sets[u];
        const PathOutcome path =
            solve_path(tr, solver, point.alpha, point.lambda_der, point.lambdas, plan);
        const Matrix shifted = te.coords.colwise() - tr.coord_means;
        std::vector<double>& out = mse[job];
        for (const Vector& coef : path.coefficients) {
            const Vector yhat = (shifted.transpose() * (gram * coef)).array() + tr.response_mean;
            out.push_back((yhat - te.response).squaredNorm() / static_cast<double>(te.num_samples()));
        }
        nonconverged[job] = path.nonconverged;
    });

    const double folds_used = static_cast<double>(used.size());
    for (std::size_t p = 0; p < num_points; ++p) {
        CvPoint& point = result.surface[p];
        const std::size_t g = point.lambdas.size();
        point.mean_mse.assign(g, 0.0);
        point.se_mse.assign(g, 0.0);
        for (std::size_t l = 0; l < g; ++l) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t u = 0; u < used.size(); ++u) {
                const double e = mse[p * used.size() + u][l];
                sum += e;
                sq += e * e;
            }
            const double mean = sum / folds_used;
            point.mean_mse[l] = mean;
            if (used.size() > 1) {
                const double var = std::max(0.0, (sq - folds_used * mean * mean) / (folds_used - 1));
                point.se_mse[l] = std::sqrt(var / folds_used);
            }
        }
    }
    int total_nonconverged = std::accumulate(nonconverged.begin(), nonconverged.end(), 0);
    if (total_nonconverged > 0) {
        result.warnings.push_back(std::to_string(total_nonconverged) +
                                  " fold fits stopped at the iteration limit");
    }

    // Minimum mean error; ties go to the larger (sparser) lambda.
    std::size_t best_p = 0, best_l = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < num_points; ++p) {
        const CvPoint& point = result.surface[p];
        for (std::size_t l = 0; l < point.lambdas.size(); ++l) {
            const double e = point.mean_mse[l];
            if (!std::isfinite(e)) continue;
            const bool tie = std::isfinite(best) && std::abs(e - best) <= 1e-12 * std::abs(best);
            if (e < best && !tie) {
                best = e;
                best_p = p;
                best_l = l;
            } else if (tie && point.lambdas[l] > result.surface[best_p].lambdas[best_l]) {
                best_p = p;
                best_l = l;
            }
        }
    }
    if (!std::isfinite(best)) throw NumericalError("cross-validation produced no finite error");
    const CvPoint& winner = result.surface[best_p];
    if (plan.one_se) {
        const double cap = winner.mean_mse[best_l] + winner.se_mse[best_l];
        for (std::size_t l = 0; l < best_l; ++l) {
            if (winner.mean_mse[l] <= cap) {
                best_l = l;
                break;
            }
        }
    }
    result.best = {winner.lambdas[best_l], winner.alpha, winner.lambda_der};
    result.best_error = winner.mean_mse[best_l];

    // Refit along the same grid prefix so the warm-start history matches the folds.
    const std::vector<double> prefix(winner.lambdas.begin(),
                                     winner.lambdas.begin() + static_cast<long>(best_l) + 1);
    PathOutcome refit = solve_path(full, solver, winner.alpha, winner.lambda_der, prefix, plan);
    const bool ridge = winner.alpha == 1.0;
    result.fit = make_fit_result(full, std::move(refit.coefficients.back()), result.best,
                                 ridge ? "direct" : to_string(solver), penalty_name(winner.alpha));
    result.fit.converged = refit.nonconverged == 0;
    result.fit.warnings = result.warnings;
    if (!result.fit.converged) result.fit.warnings.push_back("final refit did not converge");
    return result;
}

FitResult fit_penalized(const FunctionalDataset& data, const PenaltyParams& params, Solver solver,
                        const CvPlan& plan)
{
    params.validate();
    if (params.lambda == 0.0 || params.alpha == 1.0) {
        const FunctionalDataset centered = data.centered ? data : center(data);
        const DirectSolution direct =
            direct_solve(centered, params.alpha * params.lambda, params.lambda_der);
        FitResult fit = make_fit_result(centered, direct.coefficients, params, "direct",
                                        params.lambda == 0.0 ? "ols" : "ridge");
        fit.rank_deficient = direct.rank_deficient;
        if (direct.rank_deficient) {
            fit.warnings.push_back("normal matrix is rank deficient (rank " +
                                   std::to_string(direct.rank) + "); minimum-norm solution used");
        }
        return fit;
    }
    if (solver == Solver::gmd) return gmd_fit(data, params, plan.gmd);
    AdmmConfig cfg;
    cfg.lambda = params.lambda;
    cfg.alpha = params.alpha;
    cfg.lambda_der = params.lambda_der;
    cfg.rho = plan.admm_rho;
    cfg.max_iter = plan.admm_max_iter;
    return admm_fit(data, cfg);
}

FitResult fit_ols(const FunctionalDataset& data)
{
    return fit_penalized(data, {0.0, 0.0, 0.0}, Solver::gmd);
}

FitResult fit_ridge(const FunctionalDataset& data, double ridge, double lambda_der)
{
    return fit_penalized(data, {ridge, 1.0, lambda_der}, Solver::gmd);
}

FitResult fit_oracle(const FunctionalDataset& data, const IndexSet& active)
{
    if (active.empty()) throw ConfigError("oracle fit needs a nonempty active set");
    IndexSet blocks = active;
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    for (Index j : blocks) {
        if (j < 0 || j >= data.num_predictors()) throw ConfigError("oracle set index out of range");
    }
    const FunctionalDataset centered = data.centered ? data : center(data);
    const DirectSolution direct = direct_solve(centered, 0.0, 0.0, blocks);
    FitResult fit = make_fit_result(centered, direct.coefficients, {0.0, 0.0, 0.0}, "direct", "oracle");
    fit.rank_deficient = direct.rank_deficient;
    if (direct.rank_deficient) {
        fit.warnings.push_back("oracle normal matrix is rank deficient; minimum-norm solution used");
    }
    return fit;
}

Baselines baselines(const FunctionalDataset& data, const IndexSet& true_active, const CvPlan& plan)
{
    Baselines out;
    out.ols = fit_ols(data);
    CvPlan ridge_plan = plan;
    ridge_plan.alpha_grid = {1.0};
    ridge_plan.lam_der_grid = {0.0};
    out.ridge_cv = cross_validate(data, ridge_plan, Solver::gmd);
    out.ridge = out.ridge_cv.fit;
    out.oracle = fit_oracle(data, true_active);
    return out;
}

} // namespace mfsg
