#include "bsr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace bsr {

namespace {

constexpr double kMaxCandidates = 1e5;

/// Number of supports of size <= s_max out of k blocks, saturating well above
/// the guard so the count never overflows.
double count_candidates(int k, int s_max) {
  double total = 0.0;
  double choose = 1.0;  // C(k, 0)
  for (int s = 0; s <= s_max; ++s) {
    total += choose;
    if (total > 10 * kMaxCandidates) return total;
    choose = choose * (k - s) / (s + 1);
  }
  return total;
}

/// Advance a strictly increasing index combination; false when exhausted.
bool next_combination(std::vector<int>& idx, int k) {
  const int s = static_cast<int>(idx.size());
  for (int pos = s - 1; pos >= 0; --pos) {
    if (idx[pos] < k - (s - pos)) {
      ++idx[pos];
      for (int q = pos + 1; q < s; ++q) idx[q] = idx[q - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

Eigen::VectorXd brute_force_oracle(const SensingProblem& problem,
                                   int max_active_blocks) {
  const BlockPartition& part = problem.partition;
  const int k = part.blocks();
  if (max_active_blocks < 0)
    throw InvalidInput("brute_force_oracle: max_active_blocks < 0");
  const int s_max = std::min(max_active_blocks, k);
  if (count_candidates(k, s_max) > kMaxCandidates)
    throw SizeError("brute_force_oracle: more than 1e5 candidate supports");

  const double y_norm = problem.y.norm();
  const double exact_fit = 1e-12 * y_norm;

  Eigen::VectorXd best_x = Eigen::VectorXd::Zero(part.total());
  double best_resid = y_norm;  // empty support
  if (best_resid <= exact_fit) return best_x;

  for (int s = 1; s <= s_max; ++s) {
    std::vector<int> support(s);
    for (int i = 0; i < s; ++i) support[i] = i;
    do {
      int cols = 0;
      for (int b : support) cols += part.size(b);
      Eigen::MatrixXd sub(problem.m(), cols);
      int at = 0;
      for (int b : support) {
        sub.middleCols(at, part.size(b)) =
            problem.phi.middleCols(part.offset(b), part.size(b));
        at += part.size(b);
      }
      const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(problem.y);
      const double resid = (problem.y - sub * coef).norm();
      if (resid < best_resid) {
        best_resid = resid;
        best_x.setZero();
        at = 0;
        for (int b : support) {
          best_x.segment(part.offset(b), part.size(b)) = coef.segment(at, part.size(b));
          at += part.size(b);
        }
        if (best_resid <= exact_fit) return best_x;
      }
    } while (next_combination(support, k));
  }
  return best_x;
}

}  // namespace bsr
