#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bsr/errors.hpp"
#include "bsr/image.hpp"

namespace bsr {

/// Area-average pooling to an h2 x w2 grid. Output cell (i, j) is the mean of
/// the source rectangle [i*h/h2, (i+1)*h/h2) x [j*w/w2, (j+1)*w/w2), with
/// partially covered source pixels weighted by their covered fraction. The
/// result is the cell grid flattened row-major.
Eigen::VectorXd downsample(const ImageMatrix& img, int h2, int w2);

enum class FeatureKind { kDownsample, kEigenfaces, kLaplacianfaces };

/// A fitted dimensionality reducer. Downsample extractors are fitted by
/// construction; the subspace methods carry a learned projection (rows are
/// the directions) and the training mean used for centering.
struct FeatureExtractor {
  FeatureKind kind = FeatureKind::kDownsample;
  bool fitted = false;
  int in_h = 0, in_w = 0;    // source grid (downsample only)
  int out_h = 0, out_w = 0;  // target grid (downsample only)
  Eigen::MatrixXd projection;  // d x D (subspace methods)
  Eigen::VectorXd mean;        // D     (subspace methods)

  int input_dim() const;
  int output_dim() const;
};

/// Downsample extractor mapping flattened in_h x in_w images to out_h x out_w.
FeatureExtractor make_downsample(int in_h, int in_w, int out_h, int out_w);

/// Principal component projection: rows of `projection` are the top-d left
/// singular vectors of the mean-centered training matrix, each flipped so its
/// largest-magnitude entry is positive. Requires d <= min(D, N-1).
FeatureExtractor eigenfaces_fit(const std::vector<Eigen::VectorXd>& train, int d);

/// Internals of the locality-preserving fit, for inspection. The matrices are
/// expressed in the internally rescaled frame (right-hand side normalized to
/// unit trace); eigenvalues are unaffected by that rescaling.
struct LppDiagnostics {
  Eigen::MatrixXd lhs;      // U L U^T, graph Laplacian quadratic form
  Eigen::MatrixXd rhs;      // U Dg U^T, degree quadratic form (no ridge)
  double ridge = 0.0;       // added to rhs's diagonal before solving
  Eigen::MatrixXd vectors;  // p x d, unit-norm generalized eigenvectors
  Eigen::VectorXd values;   // d smallest generalized eigenvalues, ascending
};

/// Locality-preserving projection. Training data is first reduced to pca_dim
/// principal components; a symmetric k-nearest-neighbor graph with heat-kernel
/// weights exp(-dist^2 / t) is built on the projected points; the projection
/// directions solve the generalized eigenproblem U L U^T a = mu U Dg U^T a
/// for the d smallest eigenvalues and are composed with the principal
/// projection. Defaults: pca_dim <= 0 selects min(N-1, 100); t <= 0 selects
/// the mean squared pairwise distance of the projected points.
FeatureExtractor lpp_fit(const std::vector<Eigen::VectorXd>& train, int d,
                         int pca_dim = 0, int k = 5, double t = 0.0,
                         LppDiagnostics* diag = nullptr);

/// Applies the extractor: reshape + pool for downsample, centering followed
/// by projection for the subspace methods.
Eigen::VectorXd transform(const FeatureExtractor& ex, const Eigen::VectorXd& v);
Eigen::VectorXd transform(const FeatureExtractor& ex, const ImageMatrix& img);

}  // namespace bsr
