#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "bsr/classifier.hpp"
#include "bsr/rng.hpp"

using namespace bsr;

namespace {

Eigen::MatrixXd gaussian_matrix(SplitMix64& rng, int rows, int cols) {
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = rng.next_normal();
  return a;
}

/// Separable synthetic dataset: each class draws from its own random
/// low-dimensional subspace, samples on a thin shell so both subspace and
/// nearest-neighbor rules have a wide margin.
struct SubspaceDataset {
  LabeledFeatures train;
  LabeledFeatures test;
};

SubspaceDataset make_subspace_dataset(std::uint64_t seed, int classes, int dim,
                                      int ambient, int train_per, int test_per) {
  SplitMix64 rng(seed);
  SubspaceDataset data;
  for (int c = 0; c < classes; ++c) {
    Eigen::MatrixXd raw = gaussian_matrix(rng, ambient, dim);
    Eigen::MatrixXd basis =
        Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
        Eigen::MatrixXd::Identity(ambient, dim);
    auto draw = [&]() {
      Eigen::VectorXd coef(dim);
      for (int i = 0; i < dim; ++i) coef[i] = rng.next_normal();
      coef *= (0.9 + 0.2 * rng.next_double()) / coef.norm();
      return Eigen::VectorXd(basis * coef);
    };
    for (int i = 0; i < train_per; ++i) data.train.emplace_back(draw(), c);
    for (int i = 0; i < test_per; ++i) data.test.emplace_back(draw(), c);
  }
  return data;
}

}  // namespace

TEST_CASE("dictionary build groups classes and normalizes columns") {
  LabeledFeatures feats;
  Eigen::VectorXd a(3), b(3), c(3);
  a << 3, 0, 0;  // norm 3
  b << 0, 1, 0;
  c << 0, 1, 1;
  feats.emplace_back(b, 7);
  feats.emplace_back(a, 2);  // lower label arrives later
  feats.emplace_back(c, 7);

  Dictionary dict = build_dictionary(feats);
  CHECK(dict.classes() == 2);
  CHECK(dict.class_ids == std::vector<int>{2, 7});
  CHECK(dict.partition.sizes() == std::vector<int>{1, 2});
  CHECK(dict.m() == 3);
  CHECK(dict.n() == 3);
  // Class 2's single column first, unit-normalized, with the norm recorded.
  CHECK(dict.phi.col(0).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(dict.column_norms[0] == doctest::Approx(3.0));
  for (int j = 0; j < 3; ++j)
    CHECK(dict.phi.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dictionary build rejects bad input") {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(4);
  LabeledFeatures one_class{{v, 0}, {v, 0}};
  CHECK_THROWS_AS(build_dictionary(one_class), InvalidInput);
  CHECK_THROWS_AS(build_dictionary({}), InvalidInput);

  LabeledFeatures zero_col{{v, 0}, {Eigen::VectorXd::Zero(4), 1}};
  CHECK_THROWS_WITH_AS(build_dictionary(zero_col),
                       doctest::Contains("sample 1"), InvalidInput);

  LabeledFeatures mismatched{{v, 0}, {Eigen::VectorXd::Ones(5), 1}};
  CHECK_THROWS_AS(build_dictionary(mismatched), InvalidInput);
}

TEST_CASE("two single-sample classes") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  Dictionary dict = build_dictionary({{a, 0}, {b, 1}});
  CHECK(dict.partition.sizes() == std::vector<int>{1, 1});
  CHECK(dict.classes() == 2);
}

TEST_CASE("class restriction keeps one block") {
  Eigen::VectorXd x(4);
  x << 1, 2, 3, 4;
  BlockPartition part({2, 2});
  Eigen::VectorXd first = class_restrict(x, 0, part);
  CHECK(first == Eigen::Vector4d(1, 2, 0, 0));
  CHECK(class_restrict(x, 1, part) == Eigen::Vector4d(0, 0, 3, 4));

  // Completeness and idempotence.
  CHECK((class_restrict(x, 0, part) + class_restrict(x, 1, part)) == x);
  CHECK(class_restrict(first, 0, part) == first);
  CHECK_THROWS_AS(class_restrict(x, 2, part), InvalidInput);
  CHECK_THROWS_AS(class_restrict(x, -1, part), InvalidInput);
}

TEST_CASE("training column classifies to its own class with tiny residual") {
  SubspaceDataset data = make_subspace_dataset(2100, 4, 2, 30, 8, 0);
  Dictionary dict = build_dictionary(data.train);

  // Column 10 belongs to the second class (8 columns per class).
  const Eigen::VectorXd y = data.train[10].first;
  for (RecoverySolver solver :
       {RecoverySolver::kBsbl, RecoverySolver::kL1, RecoverySolver::kBlockL1}) {
    SolverOptions opts;
    opts.max_iters = 2000;
    ClassificationResult r = classify(dict, y, solver, opts);
    CHECK(r.predicted_class == 1);
    CHECK(r.residuals[1] < 1e-3);
    for (int j = 0; j < 4; ++j)
      if (j != 1) CHECK(r.residuals[j] > 0.5);
    CHECK(r.solver_name == solver_name(solver));
  }
}

TEST_CASE("duplicated classes break ties toward the lower label") {
  SplitMix64 rng(2200);
  Eigen::MatrixXd cols = gaussian_matrix(rng, 12, 3);
  LabeledFeatures feats;
  for (int c : {0, 1})
    for (int j = 0; j < 3; ++j) feats.emplace_back(cols.col(j), c);
  Dictionary dict = build_dictionary(feats);

  Eigen::VectorXd y = cols * Eigen::Vector3d(1.0, -0.5, 0.25);
  ClassificationResult r = classify(dict, y, RecoverySolver::kBsbl);
  CHECK(r.predicted_class == 0);
  CHECK(r.residuals[0] == doctest::Approx(r.residuals[1]).epsilon(1e-9));
}

TEST_CASE("separable dataset is classified perfectly by every solver") {
  SubspaceDataset data = make_subspace_dataset(2300, 5, 2, 30, 10, 5);
  Dictionary dict = build_dictionary(data.train);
  for (RecoverySolver solver :
       {RecoverySolver::kBsbl, RecoverySolver::kL1, RecoverySolver::kBlockL1}) {
    SolverOptions opts;
    opts.max_iters = 1500;
    int correct = 0;
    for (const auto& [y, label] : data.test)
      correct += classify(dict, y, solver, opts).predicted_class == label;
    CHECK(correct == static_cast<int>(data.test.size()));
  }
  int nn_correct = 0;
  for (const auto& [y, label] : data.test)
    nn_correct += nn_classify(data.train, y) == label;
  CHECK(nn_correct == static_cast<int>(data.test.size()));
}

TEST_CASE("prediction is invariant to positive test-vector scaling") {
  SubspaceDataset data = make_subspace_dataset(2400, 3, 2, 20, 6, 1);
  Dictionary dict = build_dictionary(data.train);
  const Eigen::VectorXd y = data.test[0].first;
  ClassificationResult a = classify(dict, y, RecoverySolver::kBsbl);
  ClassificationResult b = classify(dict, 37.5 * y, RecoverySolver::kBsbl);
  CHECK(a.predicted_class == b.predicted_class);
  CHECK((a.residuals - b.residuals).norm() <= 1e-9);
}

TEST_CASE("relabeling classes permutes residuals and predictions") {
  SubspaceDataset data = make_subspace_dataset(2500, 3, 2, 20, 6, 3);
  Dictionary original = build_dictionary(data.train);

  std::map<int, int> relabel{{0, 5}, {1, 0}, {2, 9}};
  LabeledFeatures renamed;
  for (const auto& [vec, label] : data.train)
    renamed.emplace_back(vec, relabel.at(label));
  Dictionary permuted = build_dictionary(renamed);

  for (const auto& [y, label] : data.test) {
    ClassificationResult a = classify(original, y, RecoverySolver::kBsbl);
    ClassificationResult b = classify(permuted, y, RecoverySolver::kBsbl);
    CHECK(relabel.at(a.predicted_class) == b.predicted_class);
    for (int j = 0; j < original.classes(); ++j) {
      const int orig_label = original.class_ids[static_cast<std::size_t>(j)];
      const auto it = std::find(permuted.class_ids.begin(), permuted.class_ids.end(),
                                relabel.at(orig_label));
      const int k = static_cast<int>(it - permuted.class_ids.begin());
      CHECK(a.residuals[j] == doctest::Approx(b.residuals[k]).epsilon(1e-5));
    }
  }
}

TEST_CASE("augmented dictionary appends an identity block") {
  SplitMix64 rng(2600);
  LabeledFeatures feats;
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 3; ++j) feats.emplace_back(gaussian_matrix(rng, 5, 1), c);
  AugmentedDictionary aug(build_dictionary(feats));
  CHECK(aug.phi_bar.rows() == 5);
  CHECK(aug.phi_bar.cols() == 11);
  CHECK(aug.phi_bar.leftCols(6) == aug.base.phi);
  CHECK(aug.phi_bar.rightCols(5) == Eigen::MatrixXd::Identity(5, 5));
  CHECK(aug.partition.blocks() == 3);
  CHECK(aug.partition.size(2) == 5);
  CHECK(aug.partition.total() == 11);
}

TEST_CASE("augmented dictionary at the published benchmark scale") {
  // 38 classes, 1207 samples of 504-dim features in total.
  SplitMix64 rng(2700);
  LabeledFeatures feats;
  int produced = 0;
  for (int c = 0; c < 38; ++c) {
    const int per = (c < 29) ? 32 : 31;  // 29*32 + 9*31 = 1207
    for (int j = 0; j < per; ++j, ++produced)
      feats.emplace_back(gaussian_matrix(rng, 504, 1), c);
  }
  REQUIRE(produced == 1207);
  Dictionary dict = build_dictionary(feats);
  CHECK(dict.phi.rows() == 504);
  CHECK(dict.phi.cols() == 1207);
  AugmentedDictionary aug(std::move(dict));
  CHECK(aug.phi_bar.rows() == 504);
  CHECK(aug.phi_bar.cols() == 1711);
}

TEST_CASE("robust mode agrees with plain mode on clean data") {
  int agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SubspaceDataset data =
        make_subspace_dataset(derive_seed(2800, seed), 3, 2, 24, 6, 2);
    Dictionary dict = build_dictionary(data.train);
    for (const auto& [y, label] : data.test) {
      ClassificationResult plain = classify(dict, y, RecoverySolver::kBsbl);
      ClassificationResult robust = classify_robust(dict, y, RecoverySolver::kBsbl);
      agree += plain.predicted_class == robust.predicted_class;
      ++total;
      CHECK(robust.epsilon_hat.size() == 24);
      CHECK(robust.epsilon_hat.norm() < 0.05);
    }
  }
  CHECK(agree >= (total * 95 + 99) / 100);
}

TEST_CASE("robust mode absorbs planted outliers") {
  int pass = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Features are scaled so ten magnitude-5 outliers carry energy comparable
    // to the clean signal rather than drowning it.
    SubspaceDataset data =
        make_subspace_dataset(derive_seed(2900, seed), 3, 2, 30, 8, 0);
    for (auto& [vec, label] : data.train) vec *= 11.0;
    Dictionary dict = build_dictionary(data.train);

    SplitMix64 rng(derive_seed(2901, seed));
    const int target = 1;
    Eigen::VectorXd y = data.train[8 * target + 2].first;  // clean class-1 column
    std::vector<int> outliers = rng.sample_without_replacement(30, 10);
    for (int pos : outliers) y[pos] += 5.0 * (rng.next_double() < 0.5 ? -1.0 : 1.0);

    ClassificationResult r = classify_robust(dict, y, RecoverySolver::kBsbl);

    // Support overlap: the ten largest outlier-vector entries vs the planted
    // positions.
    std::vector<int> order(30);
    for (int i = 0; i < 30; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(r.epsilon_hat[a]) > std::abs(r.epsilon_hat[b]);
    });
    int overlap = 0;
    for (int i = 0; i < 10; ++i)
      overlap += std::count(outliers.begin(), outliers.end(), order[i]);
    if (r.predicted_class == target && overlap >= 8) ++pass;
  }
  CHECK(pass >= 18);
}

TEST_CASE("classification rejects malformed test vectors") {
  SubspaceDataset data = make_subspace_dataset(3000, 2, 2, 10, 4, 0);
  Dictionary dict = build_dictionary(data.train);
  CHECK_THROWS_AS(classify(dict, Eigen::VectorXd::Zero(10), RecoverySolver::kL1),
                  InvalidInput);
  CHECK_THROWS_AS(classify(dict, Eigen::VectorXd::Ones(9), RecoverySolver::kL1),
                  InvalidInput);
}

TEST_CASE("nearest neighbor basics") {
  Eigen::VectorXd a(2), b(2), c(2);
  a << 0, 0;
  b << 2, 0;
  c << 1, 5;
  LabeledFeatures train{{a, 3}, {b, 1}, {c, 2}};
  CHECK(nn_classify(train, b) == 1);

  // Equidistant between classes 3 and 1: lower label wins.
  Eigen::VectorXd mid(2);
  mid << 1, 0;
  CHECK(nn_classify(train, mid) == 1);
  CHECK_THROWS_AS(nn_classify({}, mid), InvalidInput);
}

TEST_CASE("nearest neighbor separates Gaussian blobs") {
  SplitMix64 rng(3100);
  LabeledFeatures train;
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd center = 10.0 * gaussian_matrix(rng, 10, 1);
    centers.push_back(center);
    for (int i = 0; i < 15; ++i)
      train.emplace_back(center + gaussian_matrix(rng, 10, 1), c);
  }
  int correct = 0;
  for (int t = 0; t < 60; ++t) {
    const int c = t % 3;
    Eigen::VectorXd y = centers[static_cast<std::size_t>(c)] + gaussian_matrix(rng, 10, 1);
    correct += nn_classify(train, y) == c;
  }
  CHECK(correct >= 57);
}

TEST_CASE("nearest subspace basics") {
  SubspaceDataset data = make_subspace_dataset(3200, 3, 4, 25, 8, 0);
  Dictionary dict = build_dictionary(data.train);
  (void)dict;

  // A fresh combination of class 2's training columns lies in its span.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(25);
  for (int j = 0; j < 4; ++j) y += (j + 1) * data.train[16 + j].first;
  NsClassification r = ns_classify(data.train, y, 4);
  CHECK(r.predicted_class == 2);
  CHECK(r.residuals[2] <= 1e-10 * y.norm());
  CHECK_FALSE(r.dim_clipped);

  // Zero-dimensional subspaces give ||y|| everywhere and the lowest label.
  NsClassification zero = ns_classify(data.train, y, 0);
  CHECK(zero.predicted_class == 0);
  for (int j = 0; j < 3; ++j)
    CHECK(zero.residuals[j] == doctest::Approx(y.norm()));

  // Requesting more dimensions than samples clips and flags.
  NsClassification clipped = ns_classify(data.train, y, 50);
  CHECK(clipped.dim_clipped);
}

TEST_CASE("nearest subspace separates planted subspaces") {
  SubspaceDataset data = make_subspace_dataset(3300, 3, 5, 40, 10, 10);
  int correct = 0;
  for (const auto& [y, label] : data.test)
    correct += ns_classify(data.train, y, 5).predicted_class == label;
  CHECK(correct == 30);
}
