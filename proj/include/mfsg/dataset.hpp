#pragma once

#include <mfsg/basis.hpp>
#include <mfsg/types.hpp>

#include <string>
#include <vector>

namespace mfsg {

enum class CoordinateSystem {
    original,    // coordinates w.r.t. the B-spline basis; inner product via G
    orthonormal  // coordinates w.r.t. the empirical eigenfunctions; G = I
};

/**
 * n samples of p functional predictors in coordinate form plus a scalar
 * response.
 *
 * Column i of `coords` stacks the coordinates of the p curves of sample i,
 * predictor j occupying rows [j*m, (j+1)*m). After `center`, `coord_means`
 * and `response_mean` hold what was removed so predictions can be made on
 * uncentered data.
 */
struct FunctionalDataset {
    std::vector<BasisSystem> bases;
    std::vector<std::string> predictor_names;
    Matrix coords;
    Vector response;
    Vector coord_means;
    double response_mean = 0.0;
    bool centered = false;
    CoordinateSystem system = CoordinateSystem::original;

    Index num_predictors() const { return static_cast<Index>(bases.size()); }
    Index block_size() const { return bases.empty() ? 0 : bases.front().num_functions(); }
    Index num_samples() const { return coords.cols(); }
    BlockLayout layout() const { return {num_predictors(), block_size()}; }

    // Gram block of predictor j in the current coordinate system.
    Matrix gram_block(Index j) const;
};

// Validates shapes, finiteness and equal block sizes; fills default names.
FunctionalDataset make_dataset(std::vector<BasisSystem> bases, Matrix coords, Vector response,
                               std::vector<std::string> names = {});

FunctionalDataset center(const FunctionalDataset& data);

// Columns `samples` of a raw (uncentered, original-basis) dataset.
FunctionalDataset select_samples(const FunctionalDataset& data, const std::vector<Index>& samples);

// Block-diagonal G and B'' for the predictors' bases (original system).
Matrix block_gram(const std::vector<BasisSystem>& bases);
Matrix block_curvature_gram(const std::vector<BasisSystem>& bases);

struct EmpiricalCovariances {
    Matrix gamma_xx;   // n^-1 Xc Xc^T G
    Vector gamma_yx;   // n^-1 G Xc Y; gamma_yx . [beta] applies Gamma_YX to beta
    double sigma_yy = 0.0;
};

EmpiricalCovariances empirical_covariances(const FunctionalDataset& centered);

struct OrthoTransform {
    std::vector<Matrix> phi;          // columns: eigenfunction coordinates in B^j
    std::vector<Vector> eigenvalues;  // nonincreasing, per predictor
};

struct Orthogonalized {
    OrthoTransform transform;
    FunctionalDataset data;
};

Orthogonalized orthogonalize(const FunctionalDataset& centered);

// Gram of second derivatives of the eigenfunctions of predictor j.
Matrix curvature_gram_ortho(const OrthoTransform& transform, const BasisSystem& basis, Index j);

// Block-diagonal curvature Gram over all predictors in the orthonormal system.
Matrix block_curvature_gram_ortho(const OrthoTransform& transform,
                                  const std::vector<BasisSystem>& bases);

// Stacked coefficients: orthonormal -> original basis coordinates.
Vector to_original_coordinates(const OrthoTransform& transform,
                               const Eigen::Ref<const Vector>& ortho_coef);

// Symmetric matrix power via eigendecomposition, eigenvalues clamped at
// 1e-12 * max before taking the power.
Matrix symmetric_power(const Matrix& a, double power);

} // namespace mfsg
