#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bsr/sensing.hpp"

namespace bsr {

/// Hyperparameters of the hierarchical Gaussian block model: per-block scales
/// gamma_i >= 0, per-block AR(1) correlation coefficients r_i in (-1, 1)
/// inducing Toeplitz matrices B_i[p,q] = r_i^|p-q|, and the noise variance
/// lambda > 0. The prior covariance is blockdiag(gamma_1 B_1, ...,
/// gamma_K B_K); a block with active[i] == false contributes nothing.
struct BsblHyperparams {
  Eigen::VectorXd gamma;
  Eigen::VectorXd corr;
  double lambda = 1.0;
  std::vector<char> active;

  static BsblHyperparams initial(int blocks, double lambda0);

  int blocks() const { return static_cast<int>(gamma.size()); }
  void validate(const BlockPartition& partition) const;
};

/// AR(1) Toeplitz correlation matrix of the given size, B[p,q] = r^|p-q|.
Eigen::MatrixXd ar1_matrix(int size, double r);

/// Closed-form inverse of ar1_matrix (tridiagonal); requires |r| < 1.
Eigen::MatrixXd ar1_inverse(int size, double r);

/// Marginal-likelihood cost
///   log det(lambda I + Phi Sigma0 Phi^T) + y^T (lambda I + Phi Sigma0 Phi^T)^-1 y
/// evaluated through a Cholesky factorization of the m x m system matrix.
/// Throws NumericError when the factorization fails.
double compute_cost(const BsblHyperparams& hyper, const SensingProblem& problem);

struct PosteriorMoments {
  Eigen::VectorXd mu;        // n
  Eigen::MatrixXd sigma_x;   // n x n, symmetric PSD
};

/// Gaussian posterior of x given y under the current hyperparameters:
///   mu      = Sigma0 Phi^T C^-1 y
///   sigma_x = Sigma0 - Sigma0 Phi^T C^-1 Phi Sigma0,  C = lambda I + Phi Sigma0 Phi^T.
/// Rows/columns of pruned blocks are exactly zero.
PosteriorMoments posterior_moments(const BsblHyperparams& hyper,
                                   const SensingProblem& problem);

/// One EM update of {gamma_i, r_i, lambda} from posterior moments:
///   gamma_i <- tr(B_i^-1 (Sigma_i + mu_i mu_i^T)) / n_i
///   lambda  <- (||y - Phi mu||^2 + tr(Sigma Phi^T Phi)) / m   (when learned),
///              floored at 1e-8 of ||y||^2
///   r_i     <- first-lag / zeroth-lag autocorrelation of (Sigma_i + mu_i mu_i^T)/gamma_i,
///              clipped to [-0.99, 0.99] and shared across active blocks of
///              equal length.
/// The correlation step is guarded: if it would raise the cost beyond a 1e-8
/// relative slack, the previous r is kept. trace_shift is the constant added
/// to published costs by callers that solve in a rescaled frame; the guard
/// honors the slack of whichever frame is tighter.
BsblHyperparams em_update(const BsblHyperparams& hyper,
                          const Eigen::VectorXd& mu,
                          const Eigen::MatrixXd& sigma_x,
                          const SensingProblem& problem,
                          const SolverOptions& opts = {},
                          double trace_shift = 0.0);

/// Block-sparse Bayesian recovery: iterate posterior_moments / em_update with
/// automatic block pruning until x_hat stabilizes. Deterministic (fixed
/// initialization, no RNG); the recorded cost trace is non-increasing within
/// a 1e-8 relative slack or a DivergenceError is thrown. The noise variance,
/// fixed or learned, is floored at 1e-8 of the data power so the marginal
/// covariance stays well enough conditioned for that slack to be meaningful.
SolverResult bsbl_solve(const SensingProblem& problem, const SolverOptions& opts = {});

}  // namespace bsr
