#include <mfsg/admm.hpp>
#include <mfsg/error.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mfsg;

namespace {

struct Prepared {
    FunctionalDataset centered;
    Orthogonalized ortho;
    Matrix g2;
};

Prepared prepare(std::uint64_t seed, int p, int m, int n, std::vector<int> active = {0, 1})
{
    std::mt19937_64 rng(seed);
    Prepared out{center(oracle::random_dataset(rng, p, m, n, active)), {}, {}};
    out.ortho = orthogonalize(out.centered);
    out.g2 = block_curvature_gram_ortho(out.ortho.transform, out.centered.bases);
    return out;
}

AdmmConfig tight(double lambda, double alpha, double lambda_der, double rho = 1.0)
{
    AdmmConfig cfg;
    cfg.lambda = lambda;
    cfg.alpha = alpha;
    cfg.lambda_der = lambda_der;
    cfg.rho = rho;
    cfg.max_iter = 200000;
    cfg.tol_abs = 1e-12;
    cfg.tol_rel = 1e-12;
    return cfg;
}

} // namespace

TEST(AdmmFactor, SolveMatchesDenseSolve)
{
    const auto pr = prepare(1, 3, 5, 12);
    const double rho = 0.7, lam_der = 1e-4;
    const AdmmFactor factor = admm_factorize(pr.ortho.data, pr.g2, rho, lam_der);
    Matrix dense = pr.ortho.data.coords * pr.ortho.data.coords.transpose();
    dense += 12.0 * rho * Matrix::Identity(15, 15) + lam_der * pr.g2;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 5; ++rep) {
        Vector rhs(15);
        for (auto& x : rhs) x = z(rng);
        const Vector expected = dense.fullPivLu().solve(rhs);
        EXPECT_LT((factor.solve(rhs) - expected).cwiseAbs().maxCoeff(),
                  1e-10 * (1.0 + expected.cwiseAbs().maxCoeff()));
    }
}

TEST(AdmmFactor, SucceedsForRankDeficientDesign)
{
    // n - 1 = 3 < M = 20.
    const auto pr = prepare(3, 4, 5, 4);
    EXPECT_NO_THROW(admm_factorize(pr.ortho.data, pr.g2, 1.0, 0.0));
}

TEST(AdmmFactor, ZeroDesignSolvesByScaling)
{
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 4, 5));
    auto data = center(make_dataset(bases, Matrix::Zero(10, 8), Vector::Zero(8)));
    data.system = CoordinateSystem::orthonormal;
    const AdmmFactor factor(data, Matrix::Zero(10, 10), 1.0, 0.0);
    Vector y = Vector::LinSpaced(10, -1.0, 2.0);
    EXPECT_LT((factor.solve(y) - y / 8.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Admm, LargeLambdaAnnihilatesEverything)
{
    const auto pr = prepare(5, 4, 6, 40);
    AdmmConfig cfg;
    cfg.lambda = 1e6;
    const FitResult fit = admm_fit(pr.ortho, pr.g2, cfg);
    EXPECT_TRUE(fit.active_set.empty());
    EXPECT_EQ(fit.coefficients.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Admm, ZeroPenaltyMatchesDirectSolve)
{
    const auto pr = prepare(7, 3, 5, 60);
    for (double lam_der : {0.0, 1e-3}) {
        const auto cfg = tight(0.0, 0.0, lam_der);
        const AdmmFactor factor(pr.ortho.data, pr.g2, cfg.rho, cfg.lambda_der);
        const AdmmSolution sol = admm_solve(factor, cfg);
        ASSERT_TRUE(sol.converged);
        const Matrix& xc = pr.ortho.data.coords;
        Matrix system = xc * xc.transpose() + lam_der * pr.g2;
        const Vector direct = system.ldlt().solve(xc * pr.ortho.data.response);
        EXPECT_LT((sol.state.gamma - direct).cwiseAbs().maxCoeff(),
                  1e-6 * (1.0 + direct.cwiseAbs().maxCoeff()))
            << lam_der;
    }
}

TEST(Admm, KktConditionsAtSolution)
{
    const auto pr = prepare(11, 5, 6, 50, {0, 2});
    const double n = 50.0;
    for (double alpha : {0.0, 0.4}) {
        const auto cfg = tight(0.05, alpha, 1e-5);
        const AdmmFactor factor(pr.ortho.data, pr.g2, cfg.rho, cfg.lambda_der);
        const AdmmSolution sol = admm_solve(factor, cfg);
        ASSERT_TRUE(sol.converged);
        const Vector& g = sol.state.gamma;
        const Matrix& xc = pr.ortho.data.coords;
        const Vector grad =
            (xc * (xc.transpose() * g - pr.ortho.data.response) + cfg.lambda_der * (pr.g2 * g)) / n;
        const BlockLayout lay = pr.ortho.data.layout();
        for (Index j = 0; j < lay.num_blocks; ++j) {
            const Vector gj = lay.block(g, j);
            const Vector dj = lay.block(grad, j);
            if (gj.norm() > 0.0) {
                const Vector stat = dj + cfg.lambda * (1 - alpha) * gj / gj.norm() +
                                    2 * alpha * cfg.lambda * gj;
                EXPECT_LE(stat.norm(), 1e-5);
            } else {
                EXPECT_LE(dj.norm(), cfg.lambda * (1 - alpha) + 1e-5);
                EXPECT_EQ(gj.cwiseAbs().maxCoeff(), 0.0);
            }
        }
    }
}

TEST(Admm, RhoChangesIterationsNotSolution)
{
    const auto pr = prepare(13, 4, 5, 45, {1});
    std::vector<FitResult> fits;
    for (double rho : {0.5, 1.0, 2.0}) fits.push_back(admm_fit(pr.ortho, pr.g2, tight(0.08, 0.0, 0.0, rho)));
    for (const auto& f : fits) {
        EXPECT_TRUE(f.converged);
        EXPECT_EQ(f.active_set, fits[1].active_set);
        EXPECT_LT((f.coefficients - fits[1].coefficients).cwiseAbs().maxCoeff(), 2e-5);
    }
    EXPECT_NE(fits[0].iterations, fits[2].iterations);
}

TEST(Admm, ObjectiveSettlesToPlateau)
{
    const auto pr = prepare(17, 4, 5, 40);
    auto cfg = tight(0.05, 0.0, 0.0);
    const AdmmFactor factor(pr.ortho.data, pr.g2, cfg.rho, cfg.lambda_der);
    auto objective = [&](const Vector& g) {
        const Vector r = pr.ortho.data.response - pr.ortho.data.coords.transpose() * g;
        double group = 0.0;
        for (Index j = 0; j < 4; ++j) group += g.segment(j * 5, 5).norm();
        return 0.5 * r.squaredNorm() / 40.0 + cfg.lambda * group;
    };
    std::vector<double> values;
    for (int iters : {5, 20, 80, 320, 5000}) {
        cfg.max_iter = iters;
        values.push_back(objective(admm_solve(factor, cfg).state.gamma));
    }
    EXPECT_LE(values.back(), values.front());
    EXPECT_NEAR(values[3], values[4], 1e-4 * std::abs(values[4]));
}

TEST(Admm, NonConvergenceIsFlaggedNotThrown)
{
    const auto pr = prepare(19, 4, 5, 40);
    auto cfg = tight(0.05, 0.0, 0.0);
    cfg.max_iter = 2;
    const FitResult fit = admm_fit(pr.ortho, pr.g2, cfg);
    EXPECT_FALSE(fit.converged);
    EXPECT_FALSE(fit.warnings.empty());
}

TEST(Admm, RejectsInvalidConfig)
{
    const auto pr = prepare(23, 2, 4, 10);
    auto cfg = tight(0.1, 1.5, 0.0);
    EXPECT_THROW(admm_fit(pr.ortho, pr.g2, cfg), ConfigError);
    cfg = tight(0.1, 0.0, 0.0, 0.0);
    EXPECT_THROW(admm_fit(pr.ortho, pr.g2, cfg), ConfigError);
    EXPECT_THROW(AdmmFactor(pr.centered, pr.g2, 1.0, 0.0), ConfigError);
}
