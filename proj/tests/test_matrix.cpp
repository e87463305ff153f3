#include <doctest.h>

#include <stdexcept>

#include <random>

#include "rrm/matrix.hpp"

using rrm::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

double naive(const Matrix& a, const Matrix& b, std::size_t i, std::size_t j, bool ta, bool tb) {
  const std::size_t inner = ta ? a.rows() : a.cols();
  double acc = 0.0;
  for (std::size_t k = 0; k < inner; ++k) acc += (ta ? a(k, i) : a(i, k)) * (tb ? b(j, k) : b(k, j));
  return acc;
}

}  // namespace

TEST_CASE("matmul variants agree with the triple loop") {
  std::mt19937_64 rng(11);
  const Matrix a = random_matrix(5, 3, rng);
  const Matrix b = random_matrix(3, 4, rng);
  Matrix out(5, 4, 7.0);
  matmul(a, b, out);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(out(i, j) == doctest::Approx(naive(a, b, i, j, false, false)).epsilon(1e-14));

  Matrix acc(5, 4, 1.0);
  matmul_add(a, b, acc);
  CHECK(acc(2, 3) == doctest::Approx(1.0 + naive(a, b, 2, 3, false, false)).epsilon(1e-14));

  const Matrix c = random_matrix(5, 4, rng);
  Matrix atb(3, 4, 0.5);
  matmul_at_b_add(a, c, 2.0, atb);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(atb(i, j) == doctest::Approx(0.5 + 2.0 * naive(a, c, i, j, true, false)).epsilon(1e-14));

  const Matrix d = random_matrix(6, 3, rng);
  Matrix abt(5, 6);
  matmul_a_bt_add(a, d, -1.5, abt);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(abt(i, j) == doctest::Approx(-1.5 * naive(a, d, i, j, false, true)).epsilon(1e-14));
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3), b(4, 2), out(2, 2);
  CHECK_THROWS_AS(matmul(a, b, out), std::invalid_argument);
  Matrix resized(3, 3);
  matmul(a, Matrix(3, 2), resized);
  CHECK(resized.rows() == 2);
  CHECK(resized.cols() == 2);
}

TEST_CASE("row views alias storage") {
  Matrix m(2, 3);
  m.row(1)[2] = 4.0;
  CHECK(m(1, 2) == 4.0);
  m.fill(-1.0);
  CHECK(m(0, 0) == -1.0);
  CHECK(m.size() == 6);
}
