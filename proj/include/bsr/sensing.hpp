#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bsr/block_partition.hpp"
#include "bsr/errors.hpp"

namespace bsr {

/// A linear measurement model y = Phi x + n with a block structure on x.
/// Immutable after construction and safely shareable across solver runs.
struct SensingProblem {
  Eigen::MatrixXd phi;
  Eigen::VectorXd y;
  BlockPartition partition;

  SensingProblem(Eigen::MatrixXd phi_in, Eigen::VectorXd y_in, BlockPartition part)
      : phi(std::move(phi_in)), y(std::move(y_in)), partition(std::move(part)) {
    if (phi.rows() < 1 || phi.cols() < 1)
      throw InvalidInput("SensingProblem: empty matrix");
    if (phi.cols() != partition.total())
      throw InvalidInput("SensingProblem: phi has " + std::to_string(phi.cols()) +
                         " columns but partition covers " +
                         std::to_string(partition.total()));
    if (y.size() != phi.rows())
      throw InvalidInput("SensingProblem: y length " + std::to_string(y.size()) +
                         " != phi rows " + std::to_string(phi.rows()));
    if (!phi.allFinite() || !y.allFinite())
      throw InvalidInput("SensingProblem: non-finite entries");
  }

  int m() const { return static_cast<int>(phi.rows()); }
  int n() const { return static_cast<int>(phi.cols()); }
};

/// Options shared by the recovery solvers. Defaults follow the library-wide
/// conventions; individual call sites override as needed.
struct SolverOptions {
  int max_iters = 300;
  /// A block is pruned when gamma_i < prune_threshold * max_j gamma_j.
  double prune_threshold = 1e-4;
  /// Stop when the relative change of x_hat drops below this.
  double convergence_tol = 1e-6;
  /// Empty: noise variance is learned. Set: held fixed at the given value.
  std::optional<double> fixed_lambda;
  bool learn_correlation = true;
  /// Noise-tolerance radius for the constrained-form baselines; 0 means the
  /// (near) exact-fit regime.
  double epsilon = 0.0;

  void validate() const {
    if (max_iters < 1) throw InvalidInput("SolverOptions: max_iters < 1");
    if (prune_threshold <= 0) throw InvalidInput("SolverOptions: prune_threshold <= 0");
    if (convergence_tol <= 0) throw InvalidInput("SolverOptions: convergence_tol <= 0");
    if (fixed_lambda && *fixed_lambda <= 0)
      throw InvalidInput("SolverOptions: fixed lambda must be positive");
    if (epsilon < 0) throw InvalidInput("SolverOptions: epsilon < 0");
  }
};

/// Output of a recovery solver run.
struct SolverResult {
  Eigen::VectorXd x_hat;
  /// Final per-block scales (empty for the convex baselines).
  Eigen::VectorXd gamma;
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> cost_trace;
};

}  // namespace bsr
