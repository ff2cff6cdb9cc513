#include "embalign/types.hpp"

#include "embalign/error.hpp"

#include <cstring>
#include <string>

namespace embalign {

void PairedDataset::validate() const {
  if (X.rows() != Y.rows()) {
    throw_shape("paired dataset: X has " + std::to_string(X.rows()) + " rows but Y has " +
                std::to_string(Y.rows()));
  }
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace embalign
