#include <mfsg/error.hpp>
#include <mfsg/model.hpp>

#include <cmath>
#include <numeric>

namespace mfsg {

void PenaltyParams::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(lambda_der >= 0.0) || !std::isfinite(lambda_der)) {
        throw ConfigError("lambda_der must be >= 0");
    }
}

BlockLayout FitResult::layout() const
{
    const Index m = bases.empty() ? 0 : bases.front().num_functions();
    return {static_cast<Index>(bases.size()), m};
}

Vector FitResult::coefficient_block(Index j) const
{
    return layout().block(coefficients, j);
}

Vector FitResult::block_norms() const
{
    const BlockLayout lay = layout();
    Vector norms(lay.num_blocks);
    for (Index j = 0; j < lay.num_blocks; ++j) {
        const Vector b = lay.block(coefficients, j);
        norms(j) = std::sqrt(std::max(0.0, b.dot(bases[j].gram() * b)));
    }
    return norms;
}

Vector FitResult::predict(const Matrix& raw_coords) const
{
    const BlockLayout lay = layout();
    if (raw_coords.rows() != lay.total()) {
        throw ConfigError("predict: coordinate rows do not match the model");
    }
    Vector yhat = Vector::Constant(raw_coords.cols(), response_mean);
    for (Index j : active_set) {
        const Vector weight = bases[j].gram() * lay.block(coefficients, j);
        const auto block = raw_coords.middleRows(lay.offset(j), lay.block_size);
        yhat.noalias() += (block.colwise() - lay.block(coord_means, j)).transpose() * weight;
    }
    return yhat;
}

Vector FitResult::predict(const FunctionalDataset& data) const
{
    if (data.centered || data.system != CoordinateSystem::original) {
        throw ConfigError("predict expects raw (uncentered, original-basis) coordinates");
    }
    return predict(data.coords);
}

double penalized_objective(const FunctionalDataset& centered, const Eigen::Ref<const Vector>& coef,
                           const PenaltyParams& params)
{
    const BlockLayout lay = centered.layout();
    const double n = static_cast<double>(centered.num_samples());
    Vector weighted(lay.total());
    double curvature = 0.0;
    double group = 0.0;
    double squared = 0.0;
    for (Index j = 0; j < lay.num_blocks; ++j) {
        const Vector b = lay.block(coef, j);
        const Matrix gram = centered.gram_block(j);
        const Vector gb = gram * b;
        lay.block(weighted, j) = gb;
        const double sq = std::max(0.0, b.dot(gb));
        group += std::sqrt(sq);
        squared += sq;
        if (params.lambda_der > 0.0) curvature += b.dot(centered.bases[j].curvature_gram() * b);
    }
    const Vector resid = centered.response - centered.coords.transpose() * weighted;
    const double loss = 0.5 * resid.squaredNorm() + 0.5 * params.lambda_der * curvature;
    return loss / n + params.lambda * (1.0 - params.alpha) * group +
           params.alpha * params.lambda * squared;
}

IndexSet nonzero_blocks(const Eigen::Ref<const Vector>& coef, const BlockLayout& layout)
{
    IndexSet out;
    for (Index j = 0; j < layout.num_blocks; ++j) {
        if ((layout.block(coef, j).array() != 0.0).any()) out.push_back(j);
    }
    return out;
}

double rmse(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& observed)
{
    if (predicted.size() != observed.size() || predicted.size() == 0) {
        throw ConfigError("rmse: size mismatch or empty input");
    }
    return std::sqrt((predicted - observed).squaredNorm() / static_cast<double>(predicted.size()));
}

QuadraticSolver::QuadraticSolver(const FunctionalDataset& centered, double lambda_der,
                                 const IndexSet& restrict_to)
    : layout_(centered.layout()), n_(centered.num_samples())
{
    if (centered.system != CoordinateSystem::original) {
        throw ConfigError("QuadraticSolver expects original-basis coordinates");
    }
    if (restrict_to.empty()) {
        blocks_.resize(static_cast<std::size_t>(layout_.num_blocks));
        std::iota(blocks_.begin(), blocks_.end(), Index{0});
    } else {
        blocks_ = restrict_to;
    }
    const Index m = layout_.block_size;
    const Index k = static_cast<Index>(blocks_.size());

    // Whitened design: row i, block s = (R_j^{-T} G_j x_ij)^T, so that the
    // penalty b^T G b becomes the Euclidean norm of theta = R b.
    Matrix design(n_, k * m);
    Matrix curvature = Matrix::Zero(k * m, k * m);
    for (Index s = 0; s < k; ++s) {
        const Index j = blocks_[s];
        const Matrix& gram = centered.bases[j].gram();
        Eigen::LLT<Matrix> llt(gram);
        if (llt.info() != Eigen::Success) throw NumericalError("Gram matrix is not positive definite");
        const Matrix upper = llt.matrixU();
        Matrix inv = upper.triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m));
        const auto block = centered.coords.middleRows(layout_.offset(j), m);
        design.middleCols(s * m, m) = block.transpose() * gram * inv;
        curvature.block(s * m, s * m, m, m) =
            inv.transpose() * centered.bases[j].curvature_gram() * inv;
        chol_inv_.push_back(std::move(inv));
    }
    Matrix normal = design.transpose() * design;
    if (lambda_der > 0.0) normal += lambda_der * curvature;
    normal = 0.5 * (normal + normal.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
    if (eig.info() != Eigen::Success) throw NumericalError("normal-matrix eigendecomposition failed");
    eigvecs_ = eig.eigenvectors();
    eigvals_ = eig.eigenvalues();
    rhs_ = eigvecs_.transpose() * (design.transpose() * centered.response);
}

DirectSolution QuadraticSolver::solve(double ridge) const
{
    if (!(ridge >= 0.0)) throw ConfigError("ridge parameter must be >= 0");
    const double shift = 2.0 * static_cast<double>(n_) * ridge;
    const Vector shifted = eigvals_.array() + shift;
    const double top = shifted.size() ? shifted.maxCoeff() : 0.0;
    const double cutoff = 1e-12 * std::max(top, 0.0);
    DirectSolution sol;
    Vector scaled = Vector::Zero(rhs_.size());
    for (Index i = 0; i < rhs_.size(); ++i) {
        if (shifted(i) > cutoff && shifted(i) > 0.0) {
            scaled(i) = rhs_(i) / shifted(i);
            ++sol.rank;
        }
    }
    sol.rank_deficient = sol.rank < rhs_.size();
    const Vector theta = eigvecs_ * scaled;
    const Index m = layout_.block_size;
    sol.coefficients = Vector::Zero(layout_.total());
    for (std::size_t s = 0; s < blocks_.size(); ++s) {
        layout_.block(sol.coefficients, blocks_[s]) =
            chol_inv_[s] * theta.segment(static_cast<Index>(s) * m, m);
    }
    return sol;
}

DirectSolution direct_solve(const FunctionalDataset& centered, double ridge, double lambda_der,
                            const IndexSet& restrict_to)
{
    return QuadraticSolver(centered, lambda_der, restrict_to).solve(ridge);
}

FitResult make_fit_result(const FunctionalDataset& centered, Vector coefficients,
                          const PenaltyParams& params, std::string solver, std::string penalty)
{
    FitResult fit;
    fit.bases = centered.bases;
    fit.predictor_names = centered.predictor_names;
    fit.active_set = nonzero_blocks(coefficients, centered.layout());
    fit.coord_means = centered.coord_means;
    fit.response_mean = centered.response_mean;
    fit.params = params;
    fit.solver = std::move(solver);
    fit.penalty = std::move(penalty);
    fit.objective = penalized_objective(centered, coefficients, params);
    fit.coefficients = std::move(coefficients);
    return fit;
}

} // namespace mfsg
