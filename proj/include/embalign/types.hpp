#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace embalign {

/// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// n rows of (X in R^d, Y in R^m) pairs.
struct PairedDataset {
  Matrix X;
  Matrix Y;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t m() const { return static_cast<std::size_t>(Y.cols()); }

  /// Throws ShapeError when the row counts disagree.
  void validate() const;
};

/// Y-only rows used for augmentation.
struct UnpairedResponses {
  Matrix Y;

  std::size_t n() const { return static_cast<std::size_t>(Y.rows()); }
};

/// Rows of `src` selected by `idx`, in order.
Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx);

/// Bit-exact equality, shapes included.
bool bit_equal(const Matrix& a, const Matrix& b);

}  // namespace embalign
