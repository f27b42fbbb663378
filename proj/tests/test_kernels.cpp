#include <doctest.h>

#include <random>
#include <stdexcept>

#include "misca/kernels.hpp"
#include "testutil.hpp"

using misca::Matrix;
namespace kernels = misca::kernels;

namespace {

Matrix mat(int r, int c, std::initializer_list<double> values) {
  Matrix m(r, c);
  int i = 0;
  for (double v : values) m.data[static_cast<size_t>(i++)] = v;
  return m;
}

}  // namespace

TEST_CASE("matmul identity and dot product") {
  Matrix ident = mat(2, 2, {1, 0, 0, 1});
  Matrix col = mat(2, 1, {3, 4});
  Matrix out;
  kernels::matmul(ident, col, out);
  CHECK(out == col);

  Matrix row = mat(1, 2, {1, 2});
  kernels::matmul(row, col, out);
  CHECK(out.rows == 1);
  CHECK(out.cols == 1);
  CHECK(out.at(0, 0) == 11.0);
}

TEST_CASE("matmul equals the naive triple-loop oracle bitwise") {
  std::mt19937_64 rng(123);
  Matrix a = Matrix::uniform(3, 4, rng, -2.0, 2.0);
  Matrix b = Matrix::uniform(4, 2, rng, -2.0, 2.0);
  Matrix out;
  kernels::matmul(a, b, out);
  CHECK(out == testutil::naive_matmul(a, b));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Matrix a(2, 3), b(2, 2), out;
  CHECK_THROWS_WITH_AS(kernels::matmul(a, b, out), doctest::Contains("2x3"),
                       std::invalid_argument);
}

TEST_CASE("parallel kernels match the serial reference bitwise") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    std::uniform_int_distribution<int> size(1, 40);
    const int m = size(rng), k = size(rng), n = size(rng);
    Matrix a = Matrix::uniform(m, k, rng, -3.0, 3.0);
    Matrix b = Matrix::uniform(k, n, rng, -3.0, 3.0);
    Matrix p, s;
    kernels::matmul(a, b, p);
    kernels::serial::matmul(a, b, s);
    CHECK(p == s);

    Matrix bt = Matrix::uniform(n, k, rng, -3.0, 3.0);
    Matrix acc_p = Matrix::uniform(m, n, rng, -1.0, 1.0);
    Matrix acc_s = acc_p;
    kernels::matmul_nt_acc(a, bt, acc_p);
    kernels::serial::matmul_nt_acc(a, bt, acc_s);
    CHECK(acc_p == acc_s);

    Matrix at = Matrix::uniform(k, m, rng, -3.0, 3.0);
    Matrix acc2_p = Matrix::uniform(m, n, rng, -1.0, 1.0);
    Matrix acc2_s = acc2_p;
    kernels::matmul_tn_acc(at, b, acc2_p);
    kernels::serial::matmul_tn_acc(at, b, acc2_s);
    CHECK(acc2_p == acc2_s);

    Matrix x = Matrix::uniform(m, n, rng, -5.0, 5.0);
    Matrix yp, ys;
    kernels::softmax_rows(x, nullptr, yp);
    kernels::serial::softmax_rows(x, nullptr, ys);
    CHECK(yp == ys);
    kernels::softmax_cols(x, yp);
    kernels::serial::softmax_cols(x, ys);
    CHECK(yp == ys);
    kernels::tanh_forward(x, yp);
    kernels::serial::tanh_forward(x, ys);
    CHECK(yp == ys);
    kernels::sigmoid_forward(x, yp);
    kernels::serial::sigmoid_forward(x, ys);
    CHECK(yp == ys);
  }
}

TEST_CASE("softmax_rows symmetry and row sums") {
  Matrix z = mat(1, 2, {0, 0});
  Matrix out;
  kernels::softmax_rows(z, nullptr, out);
  CHECK(out.at(0, 0) == 0.5);
  CHECK(out.at(0, 1) == 0.5);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = Matrix::uniform(5, 7, rng, -50.0, 50.0);
    kernels::softmax_rows(x, nullptr, out);
    for (int i = 0; i < out.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < out.cols; ++j) sum += out.at(i, j);
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("softmax_cols columns sum to one") {
  std::mt19937_64 rng(5);
  Matrix x = Matrix::uniform(3, 2, rng, -4.0, 4.0);
  Matrix out;
  kernels::softmax_cols(x, out);
  for (int j = 0; j < out.cols; ++j) {
    double sum = 0.0;
    for (int i = 0; i < out.rows; ++i) sum += out.at(i, j);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("masked softmax zeroes masked columns and renormalizes") {
  std::mt19937_64 rng(9);
  Matrix x = Matrix::uniform(4, 5, rng, -2.0, 2.0);
  Matrix mask = mat(1, 5, {1, 1, 0, 1, 0});
  Matrix out;
  kernels::softmax_rows(x, &mask, out);
  for (int i = 0; i < out.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < out.cols; ++j) sum += out.at(i, j);
    CHECK(out.at(i, 2) == 0.0);
    CHECK(out.at(i, 4) == 0.0);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }

  Matrix all_masked = mat(1, 5, {0, 0, 0, 0, 0});
  CHECK_THROWS_AS(kernels::softmax_rows(x, &all_masked, out),
                  std::invalid_argument);
}

TEST_CASE("softmax stays finite under large logits") {
  Matrix x = mat(1, 3, {1000.0, 999.0, -1000.0});
  Matrix out;
  kernels::softmax_rows(x, nullptr, out);
  CHECK(out.all_finite());
  CHECK(out.at(0, 0) > out.at(0, 1));
}
