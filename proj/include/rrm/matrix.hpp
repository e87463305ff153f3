#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rrm {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b
void matmul_add(const Matrix& a, const Matrix& b, Matrix& out);
// out += scale * a^T * b
void matmul_at_b_add(const Matrix& a, const Matrix& b, double scale, Matrix& out);
// out += scale * a * b^T
void matmul_a_bt_add(const Matrix& a, const Matrix& b, double scale, Matrix& out);

}  // namespace rrm
