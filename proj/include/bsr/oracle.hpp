#pragma once

#include "bsr/sensing.hpp"

namespace bsr {

/// Exact block-sparse solution by exhaustive enumeration, intended as a test
/// oracle for small problems. Tries every block support of size 0 up to
/// max_active_blocks in order of increasing size (lexicographic within a
/// size), solves least squares on the selected columns, and returns the
/// coefficient vector with the smallest residual norm. Strict improvement is
/// required to replace the incumbent, so ties resolve to the smallest support
/// and then the lowest block indices. Throws SizeError when the number of
/// candidate supports exceeds 1e5.
Eigen::VectorXd brute_force_oracle(const SensingProblem& problem,
                                   int max_active_blocks);

}  // namespace bsr
