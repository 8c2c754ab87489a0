#include <mfsg/dataset.hpp>
#include <mfsg/error.hpp>

#include <algorithm>
#include <cmath>

namespace mfsg {

Matrix FunctionalDataset::gram_block(Index j) const
{
    if (system == CoordinateSystem::orthonormal) return Matrix::Identity(block_size(), block_size());
    return bases.at(static_cast<std::size_t>(j)).gram();
}

FunctionalDataset make_dataset(std::vector<BasisSystem> bases, Matrix coords, Vector response,
                               std::vector<std::string> names)
{
    if (bases.empty()) throw ConfigError("dataset needs at least one functional predictor");
    const Index m = bases.front().num_functions();
    for (const auto& b : bases) {
        if (b.num_functions() != m) {
            throw ConfigError("all predictors must use the same number of basis functions");
        }
    }
    const Index p = static_cast<Index>(bases.size());
    if (coords.rows() != p * m) {
        throw ConfigError("coordinate matrix has " + std::to_string(coords.rows()) +
                          " rows, expected p*m = " + std::to_string(p * m));
    }
    if (coords.cols() != response.size()) {
        throw ConfigError("coordinate matrix has " + std::to_string(coords.cols()) +
                          " samples but response has " + std::to_string(response.size()));
    }
    if (!coords.allFinite() || !response.allFinite()) {
        throw ConfigError("dataset contains non-finite values");
    }
    if (names.empty()) {
        for (Index j = 0; j < p; ++j) names.push_back("X" + std::to_string(j + 1));
    }
    if (static_cast<Index>(names.size()) != p) {
        throw ConfigError("predictor name count does not match number of bases");
    }
    FunctionalDataset ds;
    ds.bases = std::move(bases);
    ds.predictor_names = std::move(names);
    ds.coords = std::move(coords);
    ds.response = std::move(response);
    ds.coord_means = Vector::Zero(p * m);
    return ds;
}

FunctionalDataset center(const FunctionalDataset& data)
{
    const Index n = data.num_samples();
    if (n < 2) throw ConfigError("centering needs at least two samples");
    FunctionalDataset out = data;
    const Vector mean = data.coords.rowwise().mean();
    out.coords = data.coords.colwise() - mean;
    const double ymean = data.response.mean();
    out.response = data.response.array() - ymean;
    out.coord_means = data.coord_means + mean;
    out.response_mean = data.response_mean + ymean;
    out.centered = true;
    return out;
}

FunctionalDataset select_samples(const FunctionalDataset& data, const std::vector<Index>& samples)
{
    if (data.centered || data.system != CoordinateSystem::original) {
        throw ConfigError("select_samples expects a raw dataset");
    }
    FunctionalDataset out = data;
    out.coords.resize(data.coords.rows(), static_cast<Index>(samples.size()));
    out.response.resize(static_cast<Index>(samples.size()));
    for (std::size_t c = 0; c < samples.size(); ++c) {
        const Index s = samples[c];
        if (s < 0 || s >= data.num_samples()) throw ConfigError("select_samples: index out of range");
        out.coords.col(static_cast<Index>(c)) = data.coords.col(s);
        out.response(static_cast<Index>(c)) = data.response(s);
    }
    return out;
}

namespace {

template <class Getter>
Matrix block_diagonal(const std::vector<BasisSystem>& bases, Getter get)
{
    const Index m = bases.empty() ? 0 : bases.front().num_functions();
    const Index p = static_cast<Index>(bases.size());
    Matrix out = Matrix::Zero(p * m, p * m);
    for (Index j = 0; j < p; ++j) out.block(j * m, j * m, m, m) = get(bases[j]);
    return out;
}

} // namespace

Matrix block_gram(const std::vector<BasisSystem>& bases)
{
    return block_diagonal(bases, [](const BasisSystem& b) { return b.gram(); });
}

Matrix block_curvature_gram(const std::vector<BasisSystem>& bases)
{
    return block_diagonal(bases, [](const BasisSystem& b) { return b.curvature_gram(); });
}

EmpiricalCovariances empirical_covariances(const FunctionalDataset& centered)
{
    const Index n = centered.num_samples();
    const BlockLayout lay = centered.layout();
    EmpiricalCovariances cov;
    if (n == 0) throw ConfigError("empirical_covariances: empty dataset");
    Matrix gram = Matrix::Zero(lay.total(), lay.total());
    for (Index j = 0; j < lay.num_blocks; ++j) lay.diag_block(gram, j) = centered.gram_block(j);
    const Matrix second_moment = centered.coords * centered.coords.transpose();
    cov.gamma_xx = second_moment * gram / static_cast<double>(n);
    cov.gamma_yx = gram * (centered.coords * centered.response) / static_cast<double>(n);
    cov.sigma_yy = centered.response.squaredNorm() / static_cast<double>(n);
    return cov;
}

Matrix symmetric_power(const Matrix& a, double power)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    Vector values = eig.eigenvalues();
    const double top = values.maxCoeff();
    if (!(top > 0.0)) throw NumericalError("matrix is not positive definite");
    values = values.cwiseMax(1e-12 * top);
    const Vector powered = values.array().pow(power);
    return eig.eigenvectors() * powered.asDiagonal() * eig.eigenvectors().transpose();
}

Orthogonalized orthogonalize(const FunctionalDataset& centered)
{
    if (centered.system != CoordinateSystem::original) {
        throw ConfigError("orthogonalize: dataset is already in the orthonormal system");
    }
    const BlockLayout lay = centered.layout();
    const Index m = lay.block_size;
    Orthogonalized result;
    result.data = centered;
    result.data.system = CoordinateSystem::orthonormal;

    for (Index j = 0; j < lay.num_blocks; ++j) {
        const Matrix& gram = centered.bases[j].gram();
        Eigen::SelfAdjointEigenSolver<Matrix> geig(gram);
        if (geig.info() != Eigen::Success || geig.eigenvalues().minCoeff() <= 0.0) {
            throw NumericalError("Gram matrix of predictor '" + centered.predictor_names[j] +
                                 "' is not positive definite");
        }
        const Matrix root = symmetric_power(gram, 0.5);
        const Matrix inv_root = symmetric_power(gram, -0.5);
        const auto block = centered.coords.middleRows(lay.offset(j), m);
        Matrix scatter = root * (block * block.transpose()) * root;
        scatter = 0.5 * (scatter + scatter.transpose()).eval();

        Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter);
        if (eig.info() != Eigen::Success) throw NumericalError("scatter eigendecomposition failed");
        // Eigen returns ascending order; components are kept largest first.
        Vector values = eig.eigenvalues().reverse();
        Matrix vectors = eig.eigenvectors().rowwise().reverse();
        for (Index k = 0; k < m; ++k) {
            auto v = vectors.col(k);
            const double scale = v.cwiseAbs().maxCoeff();
            for (Index i = 0; i < m; ++i) {
                if (std::abs(v(i)) > 1e-10 * scale) {
                    if (v(i) < 0.0) v = -v;
                    break;
                }
            }
        }
        Matrix phi = inv_root * vectors;
        result.data.coords.middleRows(lay.offset(j), m) = phi.transpose() * gram * block;
        result.transform.phi.push_back(std::move(phi));
        result.transform.eigenvalues.push_back(std::move(values));
    }
    return result;
}

Matrix curvature_gram_ortho(const OrthoTransform& transform, const BasisSystem& basis, Index j)
{
    const Matrix& phi = transform.phi.at(static_cast<std::size_t>(j));
    if (phi.rows() != basis.num_functions()) {
        throw ConfigError("curvature_gram_ortho: transform and basis sizes differ");
    }
    Eigen::FullPivLU<Matrix> lu(phi);
    if (!lu.isInvertible()) throw NumericalError("eigenfunction coordinate matrix is singular");
    Matrix out = phi.transpose() * basis.curvature_gram() * phi;
    return 0.5 * (out + out.transpose());
}

Matrix block_curvature_gram_ortho(const OrthoTransform& transform,
                                  const std::vector<BasisSystem>& bases)
{
    const Index p = static_cast<Index>(bases.size());
    const Index m = p ? bases.front().num_functions() : 0;
    Matrix out = Matrix::Zero(p * m, p * m);
    for (Index j = 0; j < p; ++j) {
        out.block(j * m, j * m, m, m) = curvature_gram_ortho(transform, bases[j], j);
    }
    return out;
}

Vector to_original_coordinates(const OrthoTransform& transform,
                               const Eigen::Ref<const Vector>& ortho_coef)
{
    const Index p = static_cast<Index>(transform.phi.size());
    const Index m = p ? transform.phi.front().rows() : 0;
    if (ortho_coef.size() != p * m) throw ConfigError("coefficient length mismatch");
    Vector out(p * m);
    for (Index j = 0; j < p; ++j) {
        out.segment(j * m, m) = transform.phi[j] * ortho_coef.segment(j * m, m);
    }
    return out;
}

} // namespace mfsg
