#pragma once

#include "bsr/sensing.hpp"

namespace bsr {

/// Penalized lasso core: min_x 1/2 ||y - Phi x||^2 + rho ||x||_1 by monotone
/// accelerated proximal gradient. Terminates when the subgradient optimality
/// residual (infinity norm) drops below opts.convergence_tol; hitting
/// opts.max_iters first returns converged = false with the best iterate.
SolverResult l1_solve_penalized(const SensingProblem& problem, double rho,
                                const SolverOptions& opts = {});

/// Penalized group-lasso core: min_x 1/2 ||y - Phi x||^2 + rho sum_j ||x_j||_2
/// over the problem's partition, by monotone accelerated proximal gradient
/// with group soft-thresholding. Termination as in l1_solve_penalized but on
/// the block-wise optimality residual.
SolverResult block_l1_solve_penalized(const SensingProblem& problem, double rho,
                                      const SolverOptions& opts = {});

/// Sparse recovery baseline honoring opts.epsilon: picks rho so that the
/// penalized solution satisfies ||y - Phi x_hat|| within [0.9, 1.1] * epsilon
/// (20-step bisection). epsilon = 0 selects the near-exact-fit weight
/// rho = 1e-6 * ||Phi^T y||_inf.
SolverResult l1_solve(const SensingProblem& problem, const SolverOptions& opts = {});

/// Block-sparse recovery baseline; same epsilon handling as l1_solve with the
/// group norm, using rho = 1e-6 * max_j ||Phi_j^T y||_2 when epsilon = 0.
SolverResult block_l1_solve(const SensingProblem& problem,
                            const SolverOptions& opts = {});

}  // namespace bsr
