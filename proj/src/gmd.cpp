#include <mfsg/error.hpp>
#include <mfsg/gmd.hpp>
#include <mfsg/prox.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfsg {

Vector GmdProblem::to_work(const Eigen::Ref<const Vector>& beta) const
{
    Vector theta(layout.total());
    for (Index j = 0; j < layout.num_blocks; ++j) {
        layout.block(theta, j) = whiten[j] * beta.segment(layout.offset(j), layout.block_size);
    }
    return theta;
}

Vector GmdProblem::to_original(const Eigen::Ref<const Vector>& theta) const
{
    Vector beta(layout.total());
    for (Index j = 0; j < layout.num_blocks; ++j) {
        const auto t = theta.segment(layout.offset(j), layout.block_size);
        if ((t.array() == 0.0).all()) layout.block(beta, j).setZero();
        else layout.block(beta, j) = unwhiten[j] * t;
    }
    return beta;
}

namespace {

double largest_eigenvalue(const Matrix& a)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues().maxCoeff());
}

} // namespace

GmdProblem make_gmd_problem(const FunctionalDataset& centered, double lambda_der,
                            GmdVariant variant)
{
    if (!centered.centered || centered.system != CoordinateSystem::original) {
        throw ConfigError("GMD requires centered data in the original basis");
    }
    if (!(lambda_der >= 0.0)) throw ConfigError("lambda_der must be >= 0");
    GmdProblem pr;
    pr.layout = centered.layout();
    pr.n = centered.num_samples();
    pr.xtilde = centered.coords;
    pr.y = centered.response;
    pr.gram = block_gram(centered.bases);
    pr.curvature = block_curvature_gram(centered.bases);
    pr.lambda_der = lambda_der;
    pr.variant = variant;

    const Index p = pr.layout.num_blocks;
    const Index m = pr.layout.block_size;
    const Matrix weighted = pr.gram * pr.xtilde;  // G Xc
    pr.h_majorizer = weighted * weighted.transpose();
    if (lambda_der > 0.0) pr.h_majorizer += lambda_der * pr.curvature;
    const Vector b = weighted * pr.y;
    pr.yy = pr.y.squaredNorm();

    pr.eta.resize(p);
    pr.eta_work.resize(p);
    for (Index j = 0; j < p; ++j) {
        if (variant == GmdVariant::whitened) {
            Eigen::LLT<Matrix> llt(centered.bases[j].gram());
            if (llt.info() != Eigen::Success) {
                throw NumericalError("Gram matrix of predictor '" + centered.predictor_names[j] +
                                     "' is not positive definite");
            }
            const Matrix upper = llt.matrixU();
            pr.whiten.push_back(upper);
            pr.unwhiten.push_back(
                upper.triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m)));
        } else {
            pr.whiten.push_back(Matrix::Identity(m, m));
            pr.unwhiten.push_back(Matrix::Identity(m, m));
        }
        pr.eta(j) = largest_eigenvalue(pr.layout.diag_block(pr.h_majorizer, j));
    }

    // Congruence with the block-diagonal R^{-1}.
    pr.h_work = Matrix(pr.layout.total(), pr.layout.total());
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            pr.h_work.block(i * m, j * m, m, m) =
                pr.unwhiten[i].transpose() * pr.h_majorizer.block(i * m, j * m, m, m) *
                pr.unwhiten[j];
        }
    }
    pr.h_work = 0.5 * (pr.h_work + pr.h_work.transpose()).eval();
    pr.b_work.resize(pr.layout.total());
    for (Index j = 0; j < p; ++j) {
        pr.layout.block(pr.b_work, j) = pr.unwhiten[j].transpose() * pr.layout.block(b, j);
        pr.eta_work(j) = largest_eigenvalue(pr.layout.diag_block(pr.h_work, j));
        if (pr.eta_work(j) == 0.0) pr.degenerate.push_back(j);
    }
    pr.gamma = (1.0 + pr.eps_star) * pr.eta;
    pr.gamma_work = (1.0 + pr.eps_star) * pr.eta_work;
    return pr;
}

double gmd_loss(const GmdProblem& problem, const Eigen::Ref<const Vector>& beta)
{
    const Vector resid = problem.y - problem.xtilde.transpose() * (problem.gram * beta);
    double loss = 0.5 * resid.squaredNorm();
    if (problem.lambda_der > 0.0) loss += 0.5 * problem.lambda_der * beta.dot(problem.curvature * beta);
    return loss;
}

Vector gmd_gradient(const GmdProblem& problem, const Eigen::Ref<const Vector>& beta)
{
    const Vector resid = problem.xtilde.transpose() * (problem.gram * beta) - problem.y;
    Vector grad = problem.gram * (problem.xtilde * resid);
    if (problem.lambda_der > 0.0) grad.noalias() += problem.lambda_der * (problem.curvature * beta);
    return grad;
}

Vector gmd_block_step(const Eigen::Ref<const Vector>& neg_grad_block,
                      const Eigen::Ref<const Vector>& old_block, double gamma_j, double lam,
                      double alpha)
{
    if (!(gamma_j > 0.0)) throw NumericalError("GMD block step needs gamma_j > 0");
    const Vector v = neg_grad_block + gamma_j * old_block;
    const double f = soft_threshold_factor(v.norm(), lam * (1.0 - alpha));
    if (f == 0.0) return Vector::Zero(v.size());
    return (f / (2.0 * alpha * lam + gamma_j)) * v;
}

Vector gmd_block_update(const GmdProblem& problem, const Eigen::Ref<const Vector>& theta, Index j,
                        double lam, double alpha)
{
    const BlockLayout& lay = problem.layout;
    const Vector u = lay.block(problem.b_work, j) -
                     problem.h_work.middleRows(lay.offset(j), lay.block_size) * theta;
    if (problem.gamma_work(j) == 0.0) {
        if (u.norm() > 0.0) throw NumericalError("degenerate predictor with nonzero gradient");
        return Vector::Zero(lay.block_size);
    }
    return gmd_block_step(u, lay.block(theta, j), problem.gamma_work(j), lam, alpha);
}

double gmd_lambda_max(const GmdProblem& problem, double alpha)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("lambda_max needs alpha in [0, 1)");
    double top = 0.0;
    for (Index j = 0; j < problem.layout.num_blocks; ++j) {
        top = std::max(top, problem.layout.block(problem.b_work, j).norm());
    }
    return top / ((1.0 - alpha) * static_cast<double>(problem.n));
}

namespace {

// Compact working state over the current strong set.
struct StrongSystem {
    IndexSet blocks;
    Matrix h;       // H restricted to strong blocks
    Vector b;
    Vector theta;
    Vector u;       // b - h theta
};

StrongSystem build_strong(const GmdProblem& pr, const IndexSet& blocks, const Vector& theta)
{
    const Index m = pr.layout.block_size;
    const Index k = static_cast<Index>(blocks.size());
    StrongSystem s;
    s.blocks = blocks;
    s.h.resize(k * m, k * m);
    s.b.resize(k * m);
    s.theta.resize(k * m);
    for (Index a = 0; a < k; ++a) {
        s.b.segment(a * m, m) = pr.layout.block(pr.b_work, blocks[a]);
        s.theta.segment(a * m, m) = theta.segment(pr.layout.offset(blocks[a]), m);
        for (Index c = 0; c < k; ++c) {
            s.h.block(a * m, c * m, m, m) =
                pr.h_work.block(pr.layout.offset(blocks[a]), pr.layout.offset(blocks[c]), m, m);
        }
    }
    s.u = s.b - s.h * s.theta;
    return s;
}

double penalty_value(const Vector& theta, Index m, double lam, double alpha)
{
    double group = 0.0, squared = 0.0;
    for (Index a = 0; a * m < theta.size(); ++a) {
        const double sq = theta.segment(a * m, m).squaredNorm();
        group += std::sqrt(sq);
        squared += sq;
    }
    return lam * (1.0 - alpha) * group + alpha * lam * squared;
}

// Unscaled objective from the compact state: 0.5 yy - 0.5 theta.(b + u) + pen.
double strong_objective(const GmdProblem& pr, const StrongSystem& s, double lam, double alpha)
{
    return 0.5 * pr.yy - 0.5 * s.theta.dot(s.b + s.u) +
           penalty_value(s.theta, pr.layout.block_size, lam, alpha);
}

} // namespace

GmdSolution gmd_solve_at(const GmdProblem& problem, double lambda, double alpha,
                         const Vector* warm_beta, const IndexSet& active_hint,
                         std::optional<double> prev_lambda, const GmdOptions& options)
{
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("GMD iterations need alpha in [0, 1)");
    const BlockLayout& lay = problem.layout;
    const Index p = lay.num_blocks;
    const Index m = lay.block_size;
    const double n = static_cast<double>(problem.n);
    const double lam = lambda * n;  // unscaled
    const double threshold = lam * (1.0 - alpha);

    Vector theta = warm_beta ? problem.to_work(*warm_beta) : Vector::Zero(lay.total());
    Vector u_full = problem.b_work - problem.h_work * theta;

    GmdSolution sol;
    auto block_norm = [&](Index j) { return lay.block(u_full, j).norm(); };
    auto finish = [&](bool converged, bool kkt) {
        sol.theta = theta;
        sol.coefficients = problem.to_original(theta);
        sol.active_set = nonzero_blocks(theta, lay);
        sol.converged = converged;
        sol.kkt_passed = kkt;
        const double quad = 0.5 * problem.yy - 0.5 * theta.dot(problem.b_work + u_full);
        sol.objective = (quad + penalty_value(theta, m, lam, alpha)) / n;
        return sol;
    };

    // Zero is optimal when every gradient block sits inside the threshold.
    if ((theta.array() == 0.0).all()) {
        bool all_inside = true;
        for (Index j = 0; j < p && all_inside; ++j) {
            all_inside = block_norm(j) <= threshold * (1.0 + 1e-12);
        }
        if (all_inside) {
            sol.strong_set = {};
            return finish(true, true);
        }
    }

    std::vector<char> in_strong(static_cast<std::size_t>(p), 0);
    if (!options.strong_rule) {
        std::fill(in_strong.begin(), in_strong.end(), 1);
    } else {
        const double prev = prev_lambda ? *prev_lambda * n : lam;
        const double screen = (2.0 * lam - prev) * (1.0 - alpha);
        for (Index j = 0; j < p; ++j) {
            if (block_norm(j) > screen) in_strong[j] = 1;
            if ((lay.block(theta, j).array() != 0.0).any()) in_strong[j] = 1;
        }
        for (Index j : active_hint) {
            if (j >= 0 && j < p) in_strong[j] = 1;
        }
    }

    bool converged = false;
    bool kkt = false;
    for (int outer = 0; outer < options.max_outer; ++outer) {
        sol.outer_rounds = outer + 1;
        IndexSet blocks;
        for (Index j = 0; j < p; ++j) {
            if (in_strong[j] && problem.gamma_work(j) > 0.0) blocks.push_back(j);
        }
        StrongSystem s = build_strong(problem, blocks, theta);
        const Index k = static_cast<Index>(blocks.size());

        double obj = strong_objective(problem, s, lam, alpha);
        converged = false;
        Vector delta(m);
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            ++sol.sweeps;
            double change_sq = 0.0;
            for (Index a = 0; a < k; ++a) {
                const double g = problem.gamma_work(blocks[a]);
                const auto old_block = s.theta.segment(a * m, m);
                const Vector v = s.u.segment(a * m, m) + g * old_block;
                const double f = soft_threshold_factor(v.norm(), threshold);
                if (f == 0.0) delta = -old_block;
                else delta = (f / (2.0 * alpha * lam + g)) * v - old_block;
                if ((delta.array() == 0.0).all()) continue;
                if (f == 0.0) s.theta.segment(a * m, m).setZero();
                else s.theta.segment(a * m, m) += delta;
                s.u.noalias() -= s.h.middleCols(a * m, m) * delta;
                change_sq += delta.squaredNorm();
                if (options.trace_objective) {
                    sol.objective_trace.push_back(strong_objective(problem, s, lam, alpha) / n);
                }
            }
            const double new_obj = strong_objective(problem, s, lam, alpha);
            const double scale = s.theta.norm();
            const bool coef_done = std::sqrt(change_sq) <= options.coef_tol * scale;
            const bool obj_done = options.obj_tol > 0.0 &&
                                  std::abs(obj - new_obj) <= options.obj_tol * std::abs(new_obj);
            obj = new_obj;
            if (coef_done || obj_done) {
                converged = true;
                break;
            }
        }

        for (Index a = 0; a < k; ++a) {
            theta.segment(lay.offset(blocks[a]), m) = s.theta.segment(a * m, m);
        }
        u_full = problem.b_work - problem.h_work * theta;

        bool added = false;
        for (Index j = 0; j < p; ++j) {
            if (in_strong[j]) continue;
            if (block_norm(j) > threshold * (1.0 + options.kkt_tol)) {
                in_strong[j] = 1;
                added = true;
            }
        }
        if (!added) {
            kkt = true;
            break;
        }
    }
    for (Index j = 0; j < p; ++j) {
        if (in_strong[j]) sol.strong_set.push_back(j);
    }
    return finish(converged, kkt);
}

std::vector<double> geometric_grid(double hi, double lo, int count)
{
    if (count < 1) throw ConfigError("grid needs at least one point");
    if (!(hi > 0.0) || !(lo > 0.0) || lo > hi) throw ConfigError("invalid geometric grid bounds");
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = hi;
        return grid;
    }
    const double step = std::log(lo / hi) / (count - 1);
    for (int k = 0; k < count; ++k) grid[k] = hi * std::exp(step * k);
    grid.front() = hi;
    grid.back() = lo;
    return grid;
}

LambdaPath gmd_path_on_grid(const GmdProblem& problem, double alpha,
                            const std::vector<double>& lambdas, const GmdOptions& options)
{
    for (std::size_t k = 1; k < lambdas.size(); ++k) {
        if (!(lambdas[k] < lambdas[k - 1])) throw ConfigError("lambda grid must be strictly decreasing");
    }
    LambdaPath path;
    Vector warm = Vector::Zero(problem.layout.total());
    std::optional<double> prev;
    IndexSet hint;
    for (double lam : lambdas) {
        GmdSolution sol = gmd_solve_at(problem, lam, alpha, &warm, hint, prev, options);
        path.lambdas.push_back(lam);
        path.active_sets.push_back(sol.active_set);
        path.converged.push_back(sol.converged);
        path.kkt_passed.push_back(sol.kkt_passed);
        path.iterations.push_back(sol.sweeps);
        warm = sol.coefficients;
        hint = sol.active_set;
        path.coefficients.push_back(std::move(sol.coefficients));
        prev = lam;
    }
    return path;
}

LambdaPath gmd_path(const GmdProblem& problem, double alpha, int num_lambdas,
                    double lambda_min_ratio, const GmdOptions& options)
{
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ConfigError("gmd_path needs alpha in [0, 1); alpha = 1 is a direct ridge solve");
    }
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw ConfigError("lambda_min_ratio must lie in (0, 1)");
    }
    const double top = gmd_lambda_max(problem, alpha);
    if (!(top > 0.0)) throw NumericalError("all gradient blocks vanish at zero; degenerate data");
    return gmd_path_on_grid(problem, alpha, geometric_grid(top, top * lambda_min_ratio, num_lambdas),
                            options);
}

FitResult gmd_fit(const FunctionalDataset& data, const PenaltyParams& params,
                  const GmdOptions& options, GmdVariant variant)
{
    params.validate();
    const FunctionalDataset centered = data.centered ? data : center(data);
    if (params.alpha == 1.0 || params.lambda == 0.0) {
        const DirectSolution direct =
            direct_solve(centered, params.alpha * params.lambda, params.lambda_der);
        FitResult fit = make_fit_result(centered, direct.coefficients, params, "gmd",
                                        params.lambda == 0.0 ? "ols" : "ridge");
        if (direct.rank_deficient) {
            fit.warnings.push_back("normal matrix is rank deficient (rank " +
                                   std::to_string(direct.rank) + "); minimum-norm solution used");
        }
        return fit;
    }
    const GmdProblem problem = make_gmd_problem(centered, params.lambda_der, variant);
    const GmdSolution sol =
        gmd_solve_at(problem, params.lambda, params.alpha, nullptr, {}, std::nullopt, options);
    FitResult fit = make_fit_result(centered, sol.coefficients, params, "gmd",
                                    params.alpha == 0.0 ? "lasso" : "elastic-net");
    fit.converged = sol.converged && sol.kkt_passed;
    fit.iterations = sol.sweeps;
    if (variant == GmdVariant::literal) fit.solver = "gmd-literal";
    if (!fit.converged) fit.warnings.push_back("GMD did not converge within the sweep limits");
    return fit;
}

} // namespace mfsg
