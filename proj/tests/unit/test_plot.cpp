#include <mfsg/error.hpp>
#include <mfsg/plot.hpp>
#include <mfsg/tuning.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

using namespace mfsg;

namespace {

FitResult model_with(std::vector<Vector> blocks, int m = 7)
{
    std::vector<BasisSystem> bases(blocks.size(), make_bspline_basis({-1.0, 2.0}, 4, m));
    FitResult fit;
    fit.bases = bases;
    fit.coefficients.resize(static_cast<Index>(blocks.size()) * m);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        fit.predictor_names.push_back("P" + std::to_string(j));
        fit.coefficients.segment(static_cast<Index>(j) * m, m) = blocks[j];
    }
    fit.coord_means = Vector::Zero(fit.coefficients.size());
    fit.active_set = nonzero_blocks(fit.coefficients, fit.layout());
    return fit;
}

// (t, value) pairs of every polyline with the given class, in document order.
std::vector<std::vector<std::pair<double, double>>> polylines(const std::string& svg, const std::string& cls)
{
    std::vector<std::vector<std::pair<double, double>>> out;
    const std::regex line("<polyline class=\"" + cls + "\"[^>]* points=\"([^\"]*)\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line); it != std::sregex_iterator(); ++it) {
        std::istringstream pts((*it)[1].str());
        std::vector<std::pair<double, double>> path;
        std::string pair;
        while (pts >> pair) {
            const auto comma = pair.find(',');
            path.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
        }
        out.push_back(std::move(path));
    }
    return out;
}

} // namespace

TEST(Plot, ZeroModelHasNoPanels)
{
    const FitResult fit = model_with({Vector::Zero(7), Vector::Zero(7), Vector::Zero(7)});
    const std::string svg = render_coefficient_svg(fit);
    EXPECT_EQ(svg.find("class=\"panel\""), std::string::npos);
    EXPECT_NE(svg.find("All 3 coefficient curves are identically zero."), std::string::npos);
}

TEST(Plot, BasisFunctionPathMatchesEvaluation)
{
    for (int k : {0, 3, 6}) {
        const FitResult fit = model_with({Vector::Zero(7), Vector::Unit(7, k)});
        const std::string svg = render_coefficient_svg(fit);
        const auto lines = polylines(svg, "estimate");
        ASSERT_EQ(lines.size(), 1u);
        ASSERT_EQ(lines[0].size(), 200u);
        std::vector<double> t;
        for (const auto& [x, y] : lines[0]) t.push_back(x);
        EXPECT_EQ(t.front(), -1.0);
        EXPECT_EQ(t.back(), 2.0);
        const Matrix values = eval_basis(fit.bases[1], t);
        for (std::size_t i = 0; i < t.size(); ++i) {
            EXPECT_NEAR(t[i], -1.0 + 3.0 * static_cast<double>(i) / 199.0, 1e-15);
            EXPECT_NEAR(lines[0][i].second, values(static_cast<Index>(i), k), 1e-12);
        }
        EXPECT_NE(svg.find("1 of 2 coefficient curves are identically zero."), std::string::npos);
    }
}

TEST(Plot, OnePanelPerActivePredictorWithTruth)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    Vector a(7), b(7);
    for (auto& v : a) v = z(rng);
    for (auto& v : b) v = z(rng);
    const FitResult fit = model_with({a, Vector::Zero(7), b});
    TruthTable truth;
    truth.predictors = {"P2"};
    truth.curves = {{{-1.0, 0.0, 2.0}, {0.5, -0.5, 0.25}}};
    const std::string svg = render_coefficient_svg(fit, &truth);
    EXPECT_EQ(polylines(svg, "estimate").size(), 2u);
    const auto tr = polylines(svg, "truth");
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr[0][2], (std::pair<double, double>{2.0, 0.25}));
    EXPECT_NE(svg.find("data-predictor=\"P2\""), std::string::npos);
    EXPECT_EQ(svg.find("data-predictor=\"P1\""), std::string::npos);
    EXPECT_EQ(render_coefficient_svg(fit, &truth), svg);
}

TEST(Plot, PathFollowsFittedModel)
{
    std::mt19937_64 rng(2);
    const auto data = oracle::random_dataset(rng, 2, 6, 40);
    const FitResult fit = fit_ols(data);
    const CurvePath path = coefficient_path(fit, 1, 50);
    const Vector direct = eval_curve(fit.bases[1], fit.coefficient_block(1), path.t);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(path.value[i], direct(i));
    EXPECT_THROW(coefficient_path(fit, 2, 50), ConfigError);
    EXPECT_THROW(coefficient_path(fit, 0, 1), ConfigError);
}
