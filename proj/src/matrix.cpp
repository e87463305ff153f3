#include "rrm/matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace rrm {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
  else out.fill(0.0);
  matmul_add(a, b, out);
}

void matmul_add(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
    throw std::invalid_argument("matmul: dimension mismatch");
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < cols; ++j) o[j] += aik * brow[j];
    }
  }
}

void matmul_at_b_add(const Matrix& a, const Matrix& b, double scale, Matrix& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
    throw std::invalid_argument("matmul_at_b: dimension mismatch");
  const std::size_t cols = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = scale * a(r, i);
      if (ari == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < cols; ++j) o[j] += ari * brow[j];
    }
  }
}

void matmul_a_bt_add(const Matrix& a, const Matrix& b, double scale, Matrix& out) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows())
    throw std::invalid_argument("matmul_a_bt: dimension mismatch");
  // Transposing b turns the inner loop into a contiguous axpy.
  Matrix bt(b.cols(), b.rows());
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) bt(j, i) = scale * b(i, j);
  matmul_add(a, bt, out);
}

}  // namespace rrm
