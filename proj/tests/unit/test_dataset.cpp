#include <mfsg/dataset.hpp>
#include <mfsg/error.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mfsg;

namespace {

FunctionalDataset tiny_scalar_dataset()
{
    // m = p = 1 with the single order-1 basis on [0,1]: G = [1].
    std::vector<BasisSystem> bases{make_bspline_basis({0.0, 1.0}, 1, 1)};
    Matrix coords(1, 3);
    coords << 1.0, -1.0, 0.0;
    Vector y(3);
    y << 2.0, -2.0, 0.0;
    return make_dataset(std::move(bases), coords, y);
}

} // namespace

TEST(Center, IdenticalColumnsBecomeZero)
{
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 2, 3));
    Matrix coords(6, 2);
    coords.col(0) << 1, 2, 3, 4, 5, 6;
    coords.col(1) = coords.col(0);
    Vector y(2);
    y << 1.0, 3.0;
    const auto c = center(make_dataset(bases, coords, y));
    EXPECT_EQ(c.coords.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(c.response(0), -1.0);
    EXPECT_DOUBLE_EQ(c.response(1), 1.0);
    EXPECT_DOUBLE_EQ(c.response_mean, 2.0);
    EXPECT_TRUE(c.centered);
}

TEST(Center, MatchesDenseCenteringMatrix)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 2, 3));
    Matrix coords(6, 5);
    for (auto& x : coords.reshaped()) x = z(rng);
    Vector y = Vector::Zero(5);
    const auto c = center(make_dataset(bases, coords, y));
    const Matrix q = Matrix::Identity(5, 5) - Matrix::Constant(5, 5, 1.0 / 5.0);
    EXPECT_LT((c.coords - coords * q).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(c.coords.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Center, NeedsTwoSamples)
{
    std::vector<BasisSystem> bases{make_bspline_basis({0.0, 1.0}, 1, 1)};
    EXPECT_THROW(center(make_dataset(bases, Matrix::Ones(1, 1), Vector::Ones(1))), ConfigError);
}

TEST(MakeDataset, RejectsBadShapesAndNonFinite)
{
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 2, 3));
    EXPECT_THROW(make_dataset(bases, Matrix::Zero(5, 4), Vector::Zero(4)), ConfigError);
    EXPECT_THROW(make_dataset(bases, Matrix::Zero(6, 4), Vector::Zero(3)), ConfigError);
    Matrix bad = Matrix::Zero(6, 4);
    bad(2, 2) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(make_dataset(bases, bad, Vector::Zero(4)), ConfigError);
}

TEST(Covariances, HandComputedScalarCase)
{
    const auto data = tiny_scalar_dataset();  // already mean zero
    const auto cov = empirical_covariances(center(data));
    EXPECT_NEAR(cov.gamma_xx(0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(cov.gamma_yx(0), 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(cov.sigma_yy, 8.0 / 3.0, 1e-15);
}

TEST(Covariances, ZeroCoordinatesGiveZeroOperators)
{
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 4, 5));
    const auto cov = empirical_covariances(center(make_dataset(bases, Matrix::Zero(10, 4), Vector::Zero(4))));
    EXPECT_EQ(cov.gamma_xx.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(cov.gamma_yx.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(cov.sigma_yy, 0.0);
}

TEST(Covariances, OperatorMatchesSampleDefinition)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    const auto data = center(oracle::random_dataset(rng, 3, 6, 9));
    const auto cov = empirical_covariances(data);
    const Matrix gram = block_gram(data.bases);
    const Index n = data.num_samples();
    for (int rep = 0; rep < 10; ++rep) {
        Vector f(18), g(18);
        for (auto& x : f) x = z(rng);
        for (auto& x : g) x = z(rng);
        // <f, Gamma g>_H with Gamma g having coordinates gamma_xx * g.
        const double through_coords = f.dot(gram * (cov.gamma_xx * g));
        double sample = 0.0;
        for (Index i = 0; i < n; ++i) {
            const Vector xi = data.coords.col(i);
            sample += f.dot(gram * xi) * g.dot(gram * xi);
        }
        sample /= static_cast<double>(n);
        EXPECT_NEAR(through_coords, sample, 1e-10 * (1.0 + std::abs(sample)));
        // Gamma_YX f = E_n[y <x, f>]
        double yx = 0.0;
        for (Index i = 0; i < n; ++i) yx += data.response(i) * f.dot(gram * data.coords.col(i));
        EXPECT_NEAR(cov.gamma_yx.dot(f), yx / static_cast<double>(n), 1e-10 * (1.0 + std::abs(yx)));
    }
}

TEST(Orthogonalize, EigenfunctionsAreOrthonormal)
{
    std::mt19937_64 rng(5);
    const auto data = center(oracle::random_dataset(rng, 3, 8, 12));
    const auto ortho = orthogonalize(data);
    for (Index j = 0; j < 3; ++j) {
        const Matrix& phi = ortho.transform.phi[j];
        const Matrix ident = phi.transpose() * data.bases[j].gram() * phi;
        EXPECT_LT((ident - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-8);
        const Vector& ev = ortho.transform.eigenvalues[j];
        for (Index k = 1; k < ev.size(); ++k) EXPECT_GE(ev(k - 1), ev(k));
        EXPECT_GE(ev.minCoeff(), -1e-10 * ev.maxCoeff());
    }
}

TEST(Orthogonalize, IdentityGramWithOrthogonalColumnsPreservesNorms)
{
    // Order 1 with m = 1 on [0,1] gives G = [1]; use p = 2 such blocks.
    std::vector<BasisSystem> bases(2, make_bspline_basis({0.0, 1.0}, 1, 1));
    Matrix coords(2, 4);
    coords << 1, -1, 2, -2,
              3, -3, 0, 0;
    const auto data = center(make_dataset(bases, coords, Vector::Zero(4)));
    const auto ortho = orthogonalize(data);
    for (Index j = 0; j < 2; ++j) {
        const Matrix& phi = ortho.transform.phi[j];
        EXPECT_LT((phi.transpose() * phi - Matrix::Identity(1, 1)).norm(), 1e-12);
    }
    for (Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(ortho.data.coords.col(i).norm(), data.coords.col(i).norm(), 1e-12);
    }
}

TEST(Orthogonalize, SecondMomentDiagonalMatchesGenericEigensolver)
{
    std::mt19937_64 rng(17);
    const auto data = center(oracle::random_dataset(rng, 1, 4, 6));
    const auto ortho = orthogonalize(data);
    const Index n = data.num_samples();
    const Matrix moment = ortho.data.coords * ortho.data.coords.transpose() / static_cast<double>(n);
    // Oracle: generic (nonsymmetric) eigensolver on X X^T G, whose spectrum
    // equals that of G^{1/2} X X^T G^{1/2}.
    const Matrix& gram = data.bases[0].gram();
    Eigen::EigenSolver<Matrix> generic(data.coords * data.coords.transpose() * gram);
    std::vector<double> ev;
    for (Index k = 0; k < 4; ++k) ev.push_back(generic.eigenvalues()(k).real());
    std::sort(ev.rbegin(), ev.rend());
    for (Index k = 0; k < 4; ++k) {
        EXPECT_NEAR(moment(k, k), ev[k] / static_cast<double>(n), 1e-8);
        EXPECT_NEAR(ortho.transform.eigenvalues[0](k), ev[k], 1e-8 * (1.0 + ev[0]));
    }
    const Matrix off = moment - Matrix(moment.diagonal().asDiagonal());
    EXPECT_LT(off.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Orthogonalize, InnerProductsAreBasisInvariant)
{
    std::mt19937_64 rng(23);
    std::normal_distribution<double> z;
    const auto data = center(oracle::random_dataset(rng, 2, 7, 15));
    const auto ortho = orthogonalize(data);
    const Matrix gram = block_gram(data.bases);
    for (int rep = 0; rep < 10; ++rep) {
        Vector fc(14), gc(14);
        for (auto& x : fc) x = z(rng);
        for (auto& x : gc) x = z(rng);
        const Vector fb = to_original_coordinates(ortho.transform, fc);
        const Vector gb = to_original_coordinates(ortho.transform, gc);
        EXPECT_NEAR(fb.dot(gram * gb), fc.dot(gc), 1e-9 * (1.0 + fc.norm() * gc.norm()));
    }
    // Sample coordinates also agree: <x_i, f> computed both ways.
    Vector fc(14);
    for (auto& x : fc) x = z(rng);
    const Vector fb = to_original_coordinates(ortho.transform, fc);
    for (Index i = 0; i < data.num_samples(); ++i) {
        EXPECT_NEAR(data.coords.col(i).dot(gram * fb), ortho.data.coords.col(i).dot(fc), 1e-9);
    }
}

TEST(Orthogonalize, CovariancesDescribeSameOperator)
{
    std::mt19937_64 rng(29);
    std::normal_distribution<double> z;
    const auto data = center(oracle::random_dataset(rng, 2, 6, 20));
    const auto ortho = orthogonalize(data);
    const auto cov_b = empirical_covariances(data);
    const auto cov_c = empirical_covariances(ortho.data);
    const Matrix gram = block_gram(data.bases);
    // Diagonal with n^-1 eigenvalues in the orthonormal system.
    for (Index j = 0; j < 2; ++j) {
        const Matrix block = cov_c.gamma_xx.block(j * 6, j * 6, 6, 6);
        const Vector expected = ortho.transform.eigenvalues[j] / 20.0;
        EXPECT_LT((block.diagonal() - expected).cwiseAbs().maxCoeff(), 1e-8);
    }
    for (int rep = 0; rep < 10; ++rep) {
        Vector fc(12), gc(12);
        for (auto& x : fc) x = z(rng);
        for (auto& x : gc) x = z(rng);
        const Vector fb = to_original_coordinates(ortho.transform, fc);
        const Vector gb = to_original_coordinates(ortho.transform, gc);
        EXPECT_NEAR(fb.dot(gram * (cov_b.gamma_xx * gb)), fc.dot(cov_c.gamma_xx * gc), 1e-8);
        EXPECT_NEAR(cov_b.gamma_yx.dot(fb), cov_c.gamma_yx.dot(fc), 1e-8);
    }
    EXPECT_NEAR(cov_b.sigma_yy, cov_c.sigma_yy, 1e-14);
}

TEST(CurvatureOrtho, PiecewiseLinearIsZero)
{
    std::mt19937_64 rng(31);
    const auto data = center(oracle::random_dataset(rng, 2, 5, 10, {0}, 0.1, 2));
    const auto ortho = orthogonalize(data);
    EXPECT_EQ(curvature_gram_ortho(ortho.transform, data.bases[0], 0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CurvatureOrtho, SymmetricPsdAndMatchesPrintedFormula)
{
    std::mt19937_64 rng(37);
    const auto data = center(oracle::random_dataset(rng, 2, 9, 14));
    const auto ortho = orthogonalize(data);
    for (Index j = 0; j < 2; ++j) {
        const Matrix g2 = curvature_gram_ortho(ortho.transform, data.bases[j], j);
        EXPECT_TRUE(g2.isApprox(g2.transpose()));
        Eigen::SelfAdjointEigenSolver<Matrix> eig(g2);
        EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-8 * eig.eigenvalues().maxCoeff());
        // Phi^{-1} G^{-1} B'' G^{-1} Phi^{-T}
        const Matrix& phi = ortho.transform.phi[j];
        const Matrix phi_inv = phi.inverse();
        const Matrix g_inv = data.bases[j].gram().inverse();
        const Matrix printed =
            phi_inv * g_inv * data.bases[j].curvature_gram() * g_inv * phi_inv.transpose();
        EXPECT_LT((printed - g2).cwiseAbs().maxCoeff(), 1e-6 * g2.cwiseAbs().maxCoeff());
    }
}

TEST(CurvatureOrtho, MatchesQuadratureOfReconstructedEigenfunctions)
{
    std::mt19937_64 rng(41);
    const auto data = center(oracle::random_dataset(rng, 1, 8, 12));
    const auto ortho = orthogonalize(data);
    const Matrix g2 = curvature_gram_ortho(ortho.transform, data.bases[0], 0);
    // Oracle: Simpson on phi_i'' phi_k'' with phi evaluated by naive recursion.
    const auto& knots = data.bases[0].knots();
    const Matrix raw = oracle::simpson_gram(knots, 4, 8, 2, 20000);
    const Matrix& phi = ortho.transform.phi[0];
    const Matrix oracle = phi.transpose() * raw * phi;
    EXPECT_LT((oracle - g2).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + g2.cwiseAbs().maxCoeff()));
}
