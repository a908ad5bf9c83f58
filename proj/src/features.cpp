#include "bsr/features.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace bsr {

namespace {

/// Area-average pooling with fractional edge weights. Each target cell
/// averages the source rectangle it covers; source pixels straddling a cell
/// boundary contribute proportionally to the covered area.
Eigen::VectorXd pool(const Eigen::MatrixXd& src, int h2, int w2) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const double rh = static_cast<double>(h) / h2;
  const double rw = static_cast<double>(w) / w2;
  Eigen::VectorXd out(static_cast<Eigen::Index>(h2) * w2);
  for (int i = 0; i < h2; ++i) {
    const double r0 = i * rh, r1 = (i + 1) * rh;
    for (int j = 0; j < w2; ++j) {
      const double c0 = j * rw, c1 = (j + 1) * rw;
      double acc = 0.0, weight = 0.0;
      for (int p = static_cast<int>(std::floor(r0)); p < h && p < r1; ++p) {
        const double wr = std::min<double>(r1, p + 1) - std::max<double>(r0, p);
        if (wr <= 0.0) continue;
        for (int q = static_cast<int>(std::floor(c0)); q < w && q < c1; ++q) {
          const double wc = std::min<double>(c1, q + 1) - std::max<double>(c0, q);
          if (wc <= 0.0) continue;
          acc += wr * wc * src(p, q);
          weight += wr * wc;
        }
      }
      out[i * w2 + j] = acc / weight;
    }
  }
  return out;
}

Eigen::MatrixXd stack_columns(const std::vector<Eigen::VectorXd>& train,
                              const char* who) {
  if (train.empty()) throw InvalidInput(std::string(who) + ": empty training set");
  const Eigen::Index d0 = train.front().size();
  if (d0 < 1) throw InvalidInput(std::string(who) + ": zero-length vectors");
  Eigen::MatrixXd x(d0, static_cast<Eigen::Index>(train.size()));
  for (std::size_t j = 0; j < train.size(); ++j) {
    if (train[j].size() != d0)
      throw InvalidInput(std::string(who) + ": inconsistent vector lengths");
    x.col(static_cast<Eigen::Index>(j)) = train[j];
  }
  return x;
}

/// Flips each column so its largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& cols) {
  for (Eigen::Index k = 0; k < cols.cols(); ++k) {
    Eigen::Index idx = 0;
    cols.col(k).cwiseAbs().maxCoeff(&idx);
    if (cols(idx, k) < 0) cols.col(k) = -cols.col(k);
  }
}

}  // namespace

int FeatureExtractor::input_dim() const {
  return kind == FeatureKind::kDownsample ? in_h * in_w
                                          : static_cast<int>(projection.cols());
}

int FeatureExtractor::output_dim() const {
  return kind == FeatureKind::kDownsample ? out_h * out_w
                                          : static_cast<int>(projection.rows());
}

Eigen::VectorXd downsample(const ImageMatrix& img, int h2, int w2) {
  if (h2 < 1 || w2 < 1 || h2 > img.height() || w2 > img.width())
    throw InvalidInput("downsample: target dimensions must lie in [1, source]");
  return pool(img.pixels, h2, w2);
}

FeatureExtractor make_downsample(int in_h, int in_w, int out_h, int out_w) {
  if (in_h < 1 || in_w < 1)
    throw InvalidInput("make_downsample: source dimensions must be positive");
  if (out_h < 1 || out_w < 1 || out_h > in_h || out_w > in_w)
    throw InvalidInput("make_downsample: target dimensions must lie in [1, source]");
  FeatureExtractor ex;
  ex.kind = FeatureKind::kDownsample;
  ex.in_h = in_h;
  ex.in_w = in_w;
  ex.out_h = out_h;
  ex.out_w = out_w;
  ex.fitted = true;
  return ex;
}

FeatureExtractor eigenfaces_fit(const std::vector<Eigen::VectorXd>& train, int d) {
  Eigen::MatrixXd x = stack_columns(train, "eigenfaces_fit");
  const int big_d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  if (n < 2) throw InvalidInput("eigenfaces_fit: need at least 2 training vectors");
  if (d < 1 || d > std::min(big_d, n - 1))
    throw InvalidInput("eigenfaces_fit: d must lie in [1, min(D, N-1)]");

  const Eigen::VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
  Eigen::MatrixXd comps = svd.matrixU().leftCols(d);
  fix_signs(comps);

  FeatureExtractor ex;
  ex.kind = FeatureKind::kEigenfaces;
  ex.projection = comps.transpose();
  ex.mean = mean;
  ex.fitted = true;
  return ex;
}

FeatureExtractor lpp_fit(const std::vector<Eigen::VectorXd>& train, int d,
                         int pca_dim, int k, double t, LppDiagnostics* diag) {
  const Eigen::MatrixXd x = stack_columns(train, "lpp_fit");
  const int big_d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  if (n < 2) throw InvalidInput("lpp_fit: need at least 2 training vectors");
  const int pca_cap = std::min(big_d, n - 1);
  const int p = pca_dim <= 0 ? std::min(pca_cap, 100) : pca_dim;
  if (p > pca_cap) throw InvalidInput("lpp_fit: pca_dim exceeds min(D, N-1)");
  if (d < 1 || d > p) throw InvalidInput("lpp_fit: d must lie in [1, pca_dim]");
  if (k < 1 || k >= n) throw InvalidInput("lpp_fit: k must lie in [1, N-1]");

  const FeatureExtractor pca = eigenfaces_fit(train, p);
  Eigen::MatrixXd u(p, n);
  for (int j = 0; j < n; ++j) u.col(j) = pca.projection * (x.col(j) - pca.mean);

  Eigen::MatrixXd dist2(n, n);
  double pair_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    dist2(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (u.col(i) - u.col(j)).squaredNorm();
      dist2(i, j) = dist2(j, i) = d2;
      pair_sum += d2;
    }
  }
  const double heat =
      t > 0.0 ? t : pair_sum / (static_cast<double>(n) * (n - 1) / 2.0);
  if (!(heat > 0.0))
    throw InvalidInput("lpp_fit: degenerate training data, pass an explicit t");

  // Symmetric k-nearest-neighbor adjacency: an edge exists when either
  // endpoint lists the other among its k closest points. Ties in distance
  // break toward the lower index.
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> order;
    order.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) order.emplace_back(dist2(i, j), j);
    std::sort(order.begin(), order.end());
    for (int r = 0; r < k; ++r) {
      const int j = order[static_cast<std::size_t>(r)].second;
      adj(i, j) = adj(j, i) = 1.0;
    }
  }
  Eigen::MatrixXd wgt =
      adj.cwiseProduct((-dist2 / heat).array().exp().matrix());

  // Degrees carry a small additive guard so isolated vertices keep the
  // right-hand side invertible.
  const Eigen::VectorXd deg = wgt.rowwise().sum().array() + 1e-8;
  Eigen::MatrixXd lap = -wgt;
  lap.diagonal() += deg;

  Eigen::MatrixXd lhs = u * lap * u.transpose();
  Eigen::MatrixXd rhs = u * deg.asDiagonal() * u.transpose();
  const double scale = rhs.trace();
  if (!(scale > 0.0)) throw NumericError("lpp_fit: degree form has zero trace");
  lhs /= scale;
  rhs /= scale;
  lhs = ((lhs + lhs.transpose()) * 0.5).eval();
  rhs = ((rhs + rhs.transpose()) * 0.5).eval();

  const double ridge = 1e-8 * rhs.trace();
  Eigen::MatrixXd rhs_solved = rhs;
  rhs_solved.diagonal().array() += ridge;

  // Whiten with the Cholesky factor of the ridged right-hand side, then take
  // the d smallest eigenpairs of the symmetric reduced problem.
  Eigen::LLT<Eigen::MatrixXd> llt(rhs_solved);
  if (llt.info() != Eigen::Success)
    throw NumericError("lpp_fit: right-hand side is not positive definite");
  Eigen::MatrixXd half = llt.matrixL().solve(lhs);
  Eigen::MatrixXd reduced = llt.matrixL().solve(half.transpose()).transpose();
  reduced = ((reduced + reduced.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  if (es.info() != Eigen::Success)
    throw NumericError("lpp_fit: eigendecomposition failed");

  Eigen::MatrixXd vecs(p, d);
  for (int kk = 0; kk < d; ++kk) {
    Eigen::VectorXd a = llt.matrixU().solve(es.eigenvectors().col(kk));
    vecs.col(kk) = a / a.norm();
  }
  fix_signs(vecs);

  if (diag) {
    diag->lhs = lhs;
    diag->rhs = rhs;
    diag->ridge = ridge;
    diag->vectors = vecs;
    diag->values = es.eigenvalues().head(d);
  }

  FeatureExtractor ex;
  ex.kind = FeatureKind::kLaplacianfaces;
  ex.projection = vecs.transpose() * pca.projection;
  ex.mean = pca.mean;
  ex.fitted = true;
  return ex;
}

Eigen::VectorXd transform(const FeatureExtractor& ex, const Eigen::VectorXd& v) {
  if (!ex.fitted) throw InvalidInput("transform: extractor is not fitted");
  if (v.size() != ex.input_dim())
    throw InvalidInput("transform: input length does not match the extractor");
  if (ex.kind == FeatureKind::kDownsample) {
    Eigen::MatrixXd img(ex.in_h, ex.in_w);
    for (int i = 0; i < ex.in_h; ++i)
      for (int j = 0; j < ex.in_w; ++j) img(i, j) = v[i * ex.in_w + j];
    return pool(img, ex.out_h, ex.out_w);
  }
  return ex.projection * (v - ex.mean);
}

Eigen::VectorXd transform(const FeatureExtractor& ex, const ImageMatrix& img) {
  if (!ex.fitted) throw InvalidInput("transform: extractor is not fitted");
  if (ex.kind == FeatureKind::kDownsample) {
    if (img.height() != ex.in_h || img.width() != ex.in_w)
      throw InvalidInput("transform: image dimensions do not match the extractor");
    return pool(img.pixels, ex.out_h, ex.out_w);
  }
  return transform(ex, img.as_vector());
}

}  // namespace bsr
