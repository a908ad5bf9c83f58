#include "bsr/classifier.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "bsr/baselines.hpp"
#include "bsr/bsbl.hpp"

namespace bsr {

namespace {

SolverResult run_solver(const SensingProblem& problem, RecoverySolver solver,
                        const SolverOptions& opts) {
  switch (solver) {
    case RecoverySolver::kBsbl:
      return bsbl_solve(problem, opts);
    case RecoverySolver::kL1:
      return l1_solve(problem, opts);
    case RecoverySolver::kBlockL1:
      return block_l1_solve(problem, opts);
  }
  throw InvalidInput("unknown solver");
}

SolverResult run_with_context(const SensingProblem& problem, RecoverySolver solver,
                              const SolverOptions& opts, const char* where) {
  try {
    return run_solver(problem, solver, opts);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(where) + " [" + solver_name(solver) +
                              "]: " + e.what(),
                          e.cost_trace);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(where) + " [" + solver_name(solver) +
                       "]: " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(where) + " [" + solver_name(solver) +
                       "]: " + e.what());
  }
}

Eigen::VectorXd normalized_test_vector(const Eigen::VectorXd& y, int m) {
  if (y.size() != m)
    throw InvalidInput("classify: test vector length " + std::to_string(y.size()) +
                       " does not match dictionary rows " + std::to_string(m));
  if (!y.allFinite()) throw InvalidInput("classify: non-finite test vector");
  const double norm = y.norm();
  if (norm == 0.0) throw InvalidInput("classify: zero test vector");
  return y / norm;
}

/// Residual rule shared by both modes: r_j = ||target - Phi delta_j(x_hat)||
/// with target = y_hat - epsilon_hat, argmin with lowest-index tie-break.
void score_residuals(const Dictionary& dict, const Eigen::VectorXd& target,
                     ClassificationResult& result) {
  result.residuals.resize(dict.classes());
  int best = 0;
  for (int j = 0; j < dict.classes(); ++j) {
    const Eigen::VectorXd restricted =
        class_restrict(result.x_hat, j, dict.partition);
    result.residuals[j] = (target - dict.phi * restricted).norm();
    if (result.residuals[j] < result.residuals[best]) best = j;
  }
  result.predicted_class = dict.class_ids[static_cast<std::size_t>(best)];
}

}  // namespace

std::string solver_name(RecoverySolver solver) {
  switch (solver) {
    case RecoverySolver::kBsbl:
      return "bsbl";
    case RecoverySolver::kL1:
      return "l1";
    case RecoverySolver::kBlockL1:
      return "block_l1";
  }
  return "unknown";
}

RecoverySolver parse_solver(const std::string& name) {
  if (name == "bsbl") return RecoverySolver::kBsbl;
  if (name == "l1") return RecoverySolver::kL1;
  if (name == "block_l1") return RecoverySolver::kBlockL1;
  throw InvalidInput("unknown solver name '" + name + "'");
}

Dictionary build_dictionary(const LabeledFeatures& features) {
  if (features.empty()) throw InvalidInput("build_dictionary: no features");
  const int m = static_cast<int>(features.front().first.size());
  if (m < 1) throw InvalidInput("build_dictionary: empty feature vectors");

  std::map<int, std::vector<std::size_t>> by_class;  // label -> sample indices
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& [vec, label] = features[i];
    if (vec.size() != m)
      throw InvalidInput("build_dictionary: sample " + std::to_string(i) +
                         " has length " + std::to_string(vec.size()) +
                         ", expected " + std::to_string(m));
    if (!vec.allFinite())
      throw InvalidInput("build_dictionary: sample " + std::to_string(i) +
                         " has non-finite entries");
    if (vec.norm() == 0.0)
      throw InvalidInput("build_dictionary: sample " + std::to_string(i) +
                         " (class " + std::to_string(label) + ") has zero norm");
    by_class[label].push_back(i);
  }
  if (by_class.size() < 2)
    throw InvalidInput("build_dictionary: need at least 2 classes, got " +
                       std::to_string(by_class.size()));

  const int n = static_cast<int>(features.size());
  Dictionary dict{Eigen::MatrixXd(m, n),
                  BlockPartition({1}),  // replaced below
                  {},
                  Eigen::VectorXd(n)};
  std::vector<int> sizes;
  int col = 0;
  for (const auto& [label, idxs] : by_class) {
    dict.class_ids.push_back(label);
    sizes.push_back(static_cast<int>(idxs.size()));
    for (std::size_t i : idxs) {
      const Eigen::VectorXd& vec = features[i].first;
      const double norm = vec.norm();
      dict.column_norms[col] = norm;
      dict.phi.col(col) = vec / norm;
      ++col;
    }
  }
  dict.partition = BlockPartition(std::move(sizes));
  return dict;
}

AugmentedDictionary::AugmentedDictionary(Dictionary dict)
    : base(std::move(dict)),
      phi_bar(base.m(), base.n() + base.m()),
      partition([this] {
        std::vector<int> sizes = base.partition.sizes();
        sizes.push_back(base.m());
        return BlockPartition(std::move(sizes));
      }()) {
  phi_bar << base.phi, Eigen::MatrixXd::Identity(base.m(), base.m());
}

Eigen::VectorXd class_restrict(const Eigen::VectorXd& x, int j,
                               const BlockPartition& partition) {
  if (x.size() != partition.total())
    throw InvalidInput("class_restrict: vector length does not match partition");
  if (j < 0 || j >= partition.blocks())
    throw InvalidInput("class_restrict: class index " + std::to_string(j) +
                       " out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  out.segment(partition.offset(j), partition.size(j)) =
      x.segment(partition.offset(j), partition.size(j));
  return out;
}

ClassificationResult classify(const Dictionary& dict, const Eigen::VectorXd& y,
                              RecoverySolver solver, const SolverOptions& opts) {
  const Eigen::VectorXd y_hat = normalized_test_vector(y, dict.m());
  SensingProblem problem(dict.phi, y_hat, dict.partition);
  SolverResult sol = run_with_context(problem, solver, opts, "classify");

  ClassificationResult result;
  result.solver_name = solver_name(solver);
  result.x_hat = std::move(sol.x_hat);
  score_residuals(dict, y_hat, result);
  return result;
}

ClassificationResult classify_robust(const Dictionary& dict, const Eigen::VectorXd& y,
                                     RecoverySolver solver,
                                     const SolverOptions& opts) {
  const Eigen::VectorXd y_hat = normalized_test_vector(y, dict.m());
  AugmentedDictionary aug(dict);
  SensingProblem problem(aug.phi_bar, y_hat, aug.partition);
  SolverResult sol = run_with_context(problem, solver, opts, "classify_robust");

  ClassificationResult result;
  result.solver_name = solver_name(solver);
  result.x_hat = sol.x_hat.head(dict.n());
  result.epsilon_hat = sol.x_hat.tail(dict.m());
  score_residuals(dict, y_hat - result.epsilon_hat, result);
  return result;
}

int nn_classify(const LabeledFeatures& train, const Eigen::VectorXd& y) {
  if (train.empty()) throw InvalidInput("nn_classify: empty training set");
  double best_dist = std::numeric_limits<double>::infinity();
  int best_label = 0;
  for (const auto& [vec, label] : train) {
    if (vec.size() != y.size())
      throw InvalidInput("nn_classify: inconsistent vector lengths");
    const double d = (vec - y).norm();
    if (d < best_dist || (d == best_dist && label < best_label)) {
      best_dist = d;
      best_label = label;
    }
  }
  return best_label;
}

NsClassification ns_classify(const LabeledFeatures& train, const Eigen::VectorXd& y,
                             int subspace_dim) {
  if (train.empty()) throw InvalidInput("ns_classify: empty training set");
  if (subspace_dim < 0) throw InvalidInput("ns_classify: negative subspace_dim");

  std::map<int, std::vector<const Eigen::VectorXd*>> by_class;
  for (const auto& [vec, label] : train) {
    if (vec.size() != y.size())
      throw InvalidInput("ns_classify: inconsistent vector lengths");
    by_class[label].push_back(&vec);
  }

  NsClassification result;
  result.residuals.resize(static_cast<int>(by_class.size()));
  std::vector<int> labels;
  int j = 0;
  for (const auto& [label, cols] : by_class) {
    labels.push_back(label);
    const int count = static_cast<int>(cols.size());
    int dim = std::min({subspace_dim, count, static_cast<int>(y.size())});
    if (dim < subspace_dim && count < subspace_dim) result.dim_clipped = true;
    if (dim == 0) {
      result.residuals[j++] = y.norm();
      continue;
    }
    Eigen::MatrixXd a(y.size(), count);
    for (int c = 0; c < count; ++c) a.col(c) = *cols[static_cast<std::size_t>(c)];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
    const Eigen::MatrixXd u = svd.matrixU().leftCols(dim);
    result.residuals[j++] = (y - u * (u.transpose() * y)).norm();
  }

  int best = 0;
  for (int i = 1; i < result.residuals.size(); ++i)
    if (result.residuals[i] < result.residuals[best]) best = i;
  result.predicted_class = labels[static_cast<std::size_t>(best)];
  return result;
}

}  // namespace bsr
