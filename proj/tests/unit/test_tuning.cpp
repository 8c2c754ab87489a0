#include <mfsg/error.hpp>
#include <mfsg/prox.hpp>
#include <mfsg/tuning.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace mfsg;

namespace {

FunctionalDataset raw_data(std::uint64_t seed, int p, int m, int n, std::vector<int> active = {0, 1},
                           double noise = 0.3)
{
    std::mt19937_64 rng(seed);
    return oracle::random_dataset(rng, p, m, n, active, noise);
}

CvPlan small_plan()
{
    CvPlan plan;
    plan.lam_der_grid = {0.0, 1e-4};
    plan.lam_grid_size = 20;
    plan.seed = 11;
    return plan;
}

} // namespace

TEST(Folds, PartitionWithBalancedSizes)
{
    for (Index n : {10, 23, 101}) {
        for (int k : {2, 5, 10}) {
            const auto ids = make_folds(n, k, 3);
            std::vector<int> counts(k, 0);
            for (int f : ids) {
                ASSERT_GE(f, 0);
                ASSERT_LT(f, k);
                ++counts[f];
            }
            const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
            EXPECT_LE(*hi - *lo, 1);
            EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0), n);
        }
    }
}

TEST(Folds, DeterministicPerSeed)
{
    EXPECT_EQ(make_folds(50, 5, 9), make_folds(50, 5, 9));
    EXPECT_NE(make_folds(50, 5, 9), make_folds(50, 5, 10));
    EXPECT_THROW(make_folds(5, 6, 1), ConfigError);
    EXPECT_THROW(make_folds(5, 1, 1), ConfigError);
}

TEST(LambdaGridAdmm, SpansRidgeBlockNorms)
{
    const auto data = center(raw_data(1, 4, 5, 40));
    const auto ortho = orthogonalize(data);
    const Matrix g2 = block_curvature_gram_ortho(ortho.transform, data.bases);
    const double lam_der = 1e-3;
    // Oracle: dense ridge solve of (Xc Xc^T + n I + lambda_der G'') b = Xc Y.
    const Matrix& xc = ortho.data.coords;
    const Matrix system = xc * xc.transpose() + 40.0 * Matrix::Identity(20, 20) + lam_der * g2;
    const Vector ridge = system.fullPivLu().solve(xc * ortho.data.response);
    double lo = 1e300, hi = 0.0;
    for (Index j = 0; j < 4; ++j) {
        lo = std::min(lo, ridge.segment(j * 5, 5).norm());
        hi = std::max(hi, ridge.segment(j * 5, 5).norm());
    }
    const auto grid = lambda_grid_admm(ortho, g2, lam_der, 30);
    ASSERT_EQ(grid.size(), 30u);
    EXPECT_NEAR(grid.front(), 1.1 * hi, 1e-10 * hi);
    EXPECT_NEAR(grid.back(), 0.9 * lo, 1e-10 * lo);
    for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_LT(grid[k], grid[k - 1]);

    // One gamma step from the ridge start (u = 0, rho = 1) clears every block.
    for (Index j = 0; j < 4; ++j) {
        EXPECT_EQ(soft_threshold(ridge.segment(j * 5, 5), grid.front()).norm(), 0.0);
    }
}

TEST(LambdaGridAdmm, EqualNormsGiveSymmetricBracket)
{
    // Two predictors with identical data produce identical ridge block norms.
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    const auto basis = make_bspline_basis({0.0, 1.0}, 4, 5);
    Matrix half(5, 30);
    for (auto& x : half.reshaped()) x = z(rng);
    Matrix coords(10, 30);
    coords << half, half;
    Vector y = half.colwise().sum().transpose();
    const auto data = center(make_dataset({basis, basis}, coords, y));
    const auto ortho = orthogonalize(data);
    const Matrix g2 = block_curvature_gram_ortho(ortho.transform, data.bases);
    const auto grid = lambda_grid_admm(ortho, g2, 0.0, 10);
    EXPECT_NEAR(grid.front() / grid.back(), 1.1 / 0.9, 1e-9);
}

TEST(CrossValidate, DuplicatedSamplesKeepSelection)
{
    const auto data = raw_data(3, 5, 5, 40, {0, 2});
    const auto plan = small_plan();
    const auto folds = make_folds(40, plan.folds, plan.seed);
    Matrix coords2(data.coords.rows(), 80);
    coords2 << data.coords, data.coords;
    Vector y2(80);
    y2 << data.response, data.response;
    std::vector<int> folds2 = folds;
    folds2.insert(folds2.end(), folds.begin(), folds.end());
    const auto doubled = make_dataset(data.bases, coords2, y2);

    for (Solver solver : {Solver::gmd, Solver::admm}) {
        const CvResult a = cross_validate(data, plan, solver, folds);
        const CvResult b = cross_validate(doubled, plan, solver, folds2);
        EXPECT_EQ(a.fit.active_set, b.fit.active_set) << to_string(solver);
        EXPECT_NEAR(a.best.lambda, b.best.lambda, 1e-9 * a.best.lambda);
        EXPECT_EQ(a.best.lambda_der, b.best.lambda_der);
    }
}

TEST(CrossValidate, LeaveOneOutRuns)
{
    const auto data = raw_data(4, 3, 5, 20);
    CvPlan plan = small_plan();
    plan.folds = 20;
    const CvResult cv = cross_validate(data, plan, Solver::gmd);
    for (const auto& point : cv.surface) {
        for (double e : point.mean_mse) EXPECT_TRUE(std::isfinite(e));
    }
    EXPECT_TRUE(std::isfinite(cv.best_error));
}

TEST(CrossValidate, SurfaceInvariantToSampleOrder)
{
    const auto data = raw_data(5, 4, 5, 35);
    const auto plan = small_plan();
    const auto folds = make_folds(35, plan.folds, plan.seed);
    std::vector<Index> perm(35);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(6);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> folds_perm(35);
    for (std::size_t i = 0; i < 35; ++i) folds_perm[i] = folds[perm[i]];
    const auto shuffled = select_samples(data, perm);

    const CvResult a = cross_validate(data, plan, Solver::gmd, folds);
    const CvResult b = cross_validate(shuffled, plan, Solver::gmd, folds_perm);
    ASSERT_EQ(a.surface.size(), b.surface.size());
    for (std::size_t p = 0; p < a.surface.size(); ++p) {
        for (std::size_t l = 0; l < a.surface[p].mean_mse.size(); ++l) {
            EXPECT_NEAR(a.surface[p].mean_mse[l], b.surface[p].mean_mse[l],
                        1e-8 * a.surface[p].mean_mse[l]);
        }
    }
    EXPECT_EQ(a.fit.active_set, b.fit.active_set);
}

TEST(CrossValidate, ZeroVarianceFoldIsSkipped)
{
    auto data = raw_data(7, 3, 5, 30);
    std::vector<int> folds(30);
    for (int i = 0; i < 30; ++i) folds[i] = i % 3;
    // Samples outside fold 0 share one response, so fold 0 trains on a constant.
    for (int i = 0; i < 30; ++i) {
        if (folds[i] != 0) data.response(i) = 2.0;
    }
    const CvResult cv = cross_validate(data, small_plan(), Solver::gmd, folds);
    EXPECT_EQ(cv.skipped_folds, std::vector<int>{0});
    EXPECT_FALSE(cv.warnings.empty());
}

TEST(CrossValidate, RefitIsDeterministicAndConsistent)
{
    const auto data = raw_data(8, 5, 5, 50, {1, 3});
    const auto plan = small_plan();
    const CvResult a = cross_validate(data, plan, Solver::gmd);
    const CvResult b = cross_validate(data, plan, Solver::gmd);
    EXPECT_EQ(a.fit.coefficients, b.fit.coefficients);
    EXPECT_EQ(a.best.lambda, b.best.lambda);

    // The refit minimizes the selected objective at least as well as OLS does.
    const auto centered = center(data);
    const FitResult ols = fit_ols(data);
    EXPECT_LE(penalized_objective(centered, a.fit.coefficients, a.best),
              penalized_objective(centered, ols.coefficients, a.best) + 1e-9);
}

TEST(CrossValidate, ElasticNetNetAndAdmmSolver)
{
    const auto data = raw_data(9, 4, 5, 40);
    CvPlan plan = small_plan();
    plan.alpha_grid = {0.0, 0.5, 1.0};
    plan.threads = 2;
    for (Solver solver : {Solver::gmd, Solver::admm}) {
        const CvResult cv = cross_validate(data, plan, solver);
        EXPECT_EQ(cv.surface.size(), 6u);
        EXPECT_TRUE(std::isfinite(cv.best_error));
        EXPECT_FALSE(cv.fit.active_set.empty());
    }
}

TEST(CrossValidate, ThreadCountDoesNotChangeResult)
{
    const auto data = raw_data(10, 4, 5, 40);
    CvPlan one = small_plan(), three = small_plan();
    three.threads = 3;
    const CvResult a = cross_validate(data, one, Solver::gmd);
    const CvResult b = cross_validate(data, three, Solver::gmd);
    for (std::size_t p = 0; p < a.surface.size(); ++p) {
        EXPECT_EQ(a.surface[p].mean_mse, b.surface[p].mean_mse);
    }
    EXPECT_EQ(a.fit.coefficients, b.fit.coefficients);
}

TEST(CvPlan, RejectsInvalidNets)
{
    const auto data = raw_data(12, 3, 5, 20);
    CvPlan plan = small_plan();
    plan.alpha_grid = {1.2};
    EXPECT_THROW(cross_validate(data, plan, Solver::gmd), ConfigError);
    plan = small_plan();
    plan.lam_der_grid = {-1.0};
    EXPECT_THROW(cross_validate(data, plan, Solver::gmd), ConfigError);
    plan = small_plan();
    plan.folds = 1;
    EXPECT_THROW(cross_validate(data, plan, Solver::gmd), ConfigError);
    EXPECT_THROW(cross_validate(center(data), small_plan(), Solver::gmd), ConfigError);
}

TEST(DefaultGrid, SevenPointsFromZeroToOne)
{
    const auto grid = default_lam_der_grid();
    ASSERT_EQ(grid.size(), 7u);
    EXPECT_EQ(grid[0], 0.0);
    EXPECT_NEAR(grid[1], 1e-8, 1e-22);
    EXPECT_NEAR(grid[6], 1.0, 1e-15);
}

TEST(Baselines, OracleOnAllPredictorsIsOls)
{
    const auto data = raw_data(13, 3, 5, 40);
    const FitResult ols = fit_ols(data);
    const FitResult oracle = fit_oracle(data, {0, 1, 2});
    EXPECT_LT((ols.coefficients - oracle.coefficients).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(fit_oracle(data, {}), ConfigError);
    EXPECT_THROW(fit_oracle(data, {5}), ConfigError);
}

TEST(Baselines, OracleZeroesOutsideActiveSet)
{
    const auto data = raw_data(14, 4, 5, 40);
    const FitResult oracle = fit_oracle(data, {1, 3});
    EXPECT_EQ(oracle.active_set, (IndexSet{1, 3}));
    EXPECT_EQ(oracle.coefficients.segment(0, 5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Baselines, VanishingRidgeApproachesOls)
{
    const auto data = raw_data(15, 3, 5, 60);
    const FitResult ols = fit_ols(data);
    const FitResult ridge = fit_ridge(data, 1e-12);
    EXPECT_LT((ols.coefficients - ridge.coefficients).norm(), 1e-4 * ols.coefficients.norm());
    EXPECT_TRUE(ridge.warnings.empty());
}

TEST(Baselines, OlsOnWideDataWarns)
{
    const auto data = raw_data(16, 4, 5, 12);
    const FitResult ols = fit_ols(data);
    ASSERT_FALSE(ols.warnings.empty());
    EXPECT_NE(ols.warnings.front().find("rank"), std::string::npos);
}

TEST(Baselines, BundleRunsRidgeCv)
{
    const auto data = raw_data(17, 3, 5, 40);
    const Baselines b = baselines(data, {0, 1}, small_plan());
    EXPECT_EQ(b.ridge.penalty, "ridge");
    EXPECT_EQ(b.ridge_cv.surface.size(), 1u);
    EXPECT_EQ(b.oracle.active_set, (IndexSet{0, 1}));
    EXPECT_EQ(b.ols.active_set.size(), 3u);
}
