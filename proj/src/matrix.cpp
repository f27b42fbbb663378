#include "misca/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace misca {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
  if (r < 0 || c < 0) {
    throw std::invalid_argument("Matrix: negative shape " + shape_str());
  }
}

Matrix Matrix::scalar(double v) {
  Matrix m(1, 1);
  m.data[0] = v;
  return m;
}

Matrix Matrix::uniform(int r, int c, std::mt19937_64& rng, double lo,
                       double hi) {
  Matrix m(r, c);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

void Matrix::fill(double v) {
  for (auto& x : data) x = v;
}

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Matrix::item() const {
  if (!is_scalar()) {
    throw std::invalid_argument("Matrix::item: expected 1x1, got " +
                                shape_str());
  }
  return data[0];
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape_error("max_abs_diff", a, b);
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  }
  return m;
}

void throw_shape_error(const std::string& op, const Matrix& a,
                       const Matrix& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

void throw_shape_error(const std::string& op, const Matrix& a) {
  throw std::invalid_argument(op + ": bad shape " + a.shape_str());
}

}  // namespace misca
