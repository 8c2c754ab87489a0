#include <mfsg/error.hpp>
#include <mfsg/prox.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mfsg;

TEST(SoftThreshold, BoundaryMapsToZero)
{
    const Vector y = Eigen::Vector2d(3.0, 4.0);
    const Vector x = soft_threshold(y, 5.0);
    EXPECT_EQ(x(0), 0.0);
    EXPECT_EQ(x(1), 0.0);
}

TEST(SoftThreshold, ZeroThresholdIsIdentity)
{
    const Vector y = Eigen::Vector3d(-1.5, 0.25, 9.0);
    EXPECT_EQ(soft_threshold(y, 0.0), y);
}

TEST(SoftThreshold, MatchesNumericMinimizer)
{
    const Vector y = Eigen::Vector2d(3.0, 4.0);
    const Vector x = soft_threshold(y, 2.5);
    EXPECT_NEAR(x(0), 1.5, 1e-15);
    EXPECT_NEAR(x(1), 2.0, 1e-15);
    const Vector oracle = oracle::numeric_prox(y, 2.5, 0.0);
    EXPECT_LT((x - oracle).norm(), 1e-6);
}

TEST(SoftThreshold, NegativeThresholdThrows)
{
    EXPECT_THROW(soft_threshold(Vector::Ones(2), -1e-3), ConfigError);
    EXPECT_THROW(elastic_soft_threshold(Vector::Ones(2), -1.0, 0.0), ConfigError);
    EXPECT_THROW(elastic_soft_threshold(Vector::Ones(2), 1.0, -1.0), ConfigError);
}

TEST(ElasticSoftThreshold, ReducesToSoftThresholdAtZeroB)
{
    const Vector y = Eigen::Vector3d(1.0, -2.0, 0.5);
    EXPECT_EQ(elastic_soft_threshold(y, 0.7, 0.0), soft_threshold(y, 0.7));
}

TEST(ElasticSoftThreshold, WorkedExample)
{
    const Vector y = Eigen::Vector2d(3.0, 4.0);
    const Vector x = elastic_soft_threshold(y, 2.5, 1.0);
    EXPECT_NEAR(x(0), 0.75, 1e-15);
    EXPECT_NEAR(x(1), 1.0, 1e-15);
    EXPECT_LT((x - oracle::numeric_prox(y, 2.5, 1.0)).norm(), 1e-6);
}

TEST(ElasticSoftThreshold, InsideThresholdIsZeroForAnyB)
{
    const Vector y = Eigen::Vector2d(0.3, -0.4);
    for (double b : {0.0, 0.5, 3.0, 100.0}) {
        EXPECT_EQ(elastic_soft_threshold(y, 0.5, b).cwiseAbs().maxCoeff(), 0.0);
    }
}

class ProxProperties : public ::testing::Test {
protected:
    std::mt19937_64 rng{2024};
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> unif{0.0, 3.0};

    Vector draw(int m)
    {
        Vector v(m);
        for (auto& x : v) x = z(rng);
        return v;
    }
};

TEST_F(ProxProperties, Nonexpansive)
{
    for (int rep = 0; rep < 500; ++rep) {
        const int m = 1 + rep % 7;
        const Vector a = draw(m), b = draw(m);
        const double lam = unif(rng);
        EXPECT_LE((soft_threshold(a, lam) - soft_threshold(b, lam)).norm(), (a - b).norm() + 1e-14);
    }
}

TEST_F(ProxProperties, OutputParallelToInput)
{
    for (int rep = 0; rep < 500; ++rep) {
        const int m = 2 + rep % 6;
        const Vector y = draw(m);
        const Vector x = soft_threshold(y, unif(rng));
        if (x.norm() == 0.0) continue;
        // |<x,y>| = ||x|| ||y|| iff collinear; also same orientation.
        const double cosine = x.dot(y) / (x.norm() * y.norm());
        EXPECT_NEAR(cosine, 1.0, 1e-12);
    }
}

TEST_F(ProxProperties, KktCertificate)
{
    for (int rep = 0; rep < 1000; ++rep) {
        const int m = 1 + rep % 9;
        const Vector y = draw(m);
        const double lam = unif(rng);
        const Vector x = soft_threshold(y, lam);
        if (x.norm() == 0.0) {
            EXPECT_LE(y.norm(), lam);
        } else {
            const Vector residual = x - y + lam * x / x.norm();
            EXPECT_LT(residual.norm(), 1e-10 * (1.0 + y.norm()));
        }
    }
}
