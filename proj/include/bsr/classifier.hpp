#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "bsr/sensing.hpp"

namespace bsr {

using LabeledFeatures = std::vector<std::pair<Eigen::VectorXd, int>>;

/// Training dictionary: one column per training feature vector, columns
/// grouped contiguously by class in ascending label order and normalized to
/// unit length. Immutable after build and shareable across classifications.
struct Dictionary {
  Eigen::MatrixXd phi;           // m x n, unit columns
  BlockPartition partition;      // block i = class_ids[i]'s columns
  std::vector<int> class_ids;    // ascending labels, one per block
  Eigen::VectorXd column_norms;  // original norms before normalization

  int m() const { return static_cast<int>(phi.rows()); }
  int n() const { return static_cast<int>(phi.cols()); }
  int classes() const { return static_cast<int>(class_ids.size()); }
};

/// Dictionary with an appended identity so per-entry outliers can be absorbed
/// into an explicit outlier vector. The outlier columns form one extra block
/// of size m at the end of the partition.
struct AugmentedDictionary {
  Dictionary base;
  Eigen::MatrixXd phi_bar;   // m x (n + m), [phi, I]
  BlockPartition partition;  // base blocks plus one size-m outlier block

  explicit AugmentedDictionary(Dictionary dict);
};

struct ClassificationResult {
  int predicted_class = -1;
  /// Per-class reconstruction residuals, indexed like Dictionary::class_ids.
  Eigen::VectorXd residuals;
  Eigen::VectorXd x_hat;        // coefficients over the dictionary columns
  Eigen::VectorXd epsilon_hat;  // outlier estimate; empty in plain mode
  std::string solver_name;
};

enum class RecoverySolver { kBsbl, kL1, kBlockL1 };

std::string solver_name(RecoverySolver solver);
RecoverySolver parse_solver(const std::string& name);

/// Assemble a dictionary from labeled feature vectors. Requires at least two
/// distinct classes, consistent vector lengths, and no zero vectors.
Dictionary build_dictionary(const LabeledFeatures& features);

/// Keep the entries of x that belong to class block j, zero the rest.
Eigen::VectorXd class_restrict(const Eigen::VectorXd& x, int j,
                               const BlockPartition& partition);

/// Sparse-representation classification: express the (unit-normalized) test
/// vector over the dictionary with the chosen solver and pick the class with
/// the smallest reconstruction residual ||y - Phi delta_j(x_hat)||. Ties go
/// to the lowest class index.
ClassificationResult classify(const Dictionary& dict, const Eigen::VectorXd& y,
                              RecoverySolver solver, const SolverOptions& opts = {});

/// Robust variant: solve over [Phi, I] so sparse per-entry outliers land in
/// an explicit outlier vector, then score residuals against y - epsilon_hat.
ClassificationResult classify_robust(const Dictionary& dict, const Eigen::VectorXd& y,
                                     RecoverySolver solver,
                                     const SolverOptions& opts = {});

/// Label of the nearest training vector in Euclidean distance; equidistant
/// candidates resolve to the lower class label.
int nn_classify(const LabeledFeatures& train, const Eigen::VectorXd& y);

struct NsClassification {
  int predicted_class = -1;
  Eigen::VectorXd residuals;  // per class, ascending label order
  /// True when some class had fewer samples than the requested dimension and
  /// its subspace was clipped to the sample count.
  bool dim_clipped = false;
};

/// Nearest-subspace classification: project y onto each class's top
/// subspace_dim left singular subspace and pick the smallest projection
/// residual.
NsClassification ns_classify(const LabeledFeatures& train, const Eigen::VectorXd& y,
                             int subspace_dim = 9);

}  // namespace bsr
