#pragma once

#include <Eigen/Dense>

#include "bsr/errors.hpp"

namespace bsr {

/// Grayscale image with values clamped to [0, 255] on construction.
struct ImageMatrix {
  Eigen::MatrixXd pixels;  // h x w

  explicit ImageMatrix(Eigen::MatrixXd p) : pixels(std::move(p)) {
    if (pixels.rows() < 1 || pixels.cols() < 1)
      throw InvalidInput("ImageMatrix: dimensions must be at least 1x1");
    if (!pixels.allFinite())
      throw InvalidInput("ImageMatrix: pixel values must be finite");
    pixels = pixels.cwiseMax(0.0).cwiseMin(255.0);
  }

  int height() const { return static_cast<int>(pixels.rows()); }
  int width() const { return static_cast<int>(pixels.cols()); }

  /// Row-major flattening: entry (i, j) lands at index i*width + j.
  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(pixels.size());
    for (int i = 0; i < pixels.rows(); ++i)
      for (int j = 0; j < pixels.cols(); ++j) v[i * pixels.cols() + j] = pixels(i, j);
    return v;
  }
};

}  // namespace bsr
