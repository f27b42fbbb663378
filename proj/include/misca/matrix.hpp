#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace misca {

// Dense row-major matrix of doubles. The only tensor type in the project;
// column vectors are (r x 1) matrices, scalars are (1 x 1).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
  static Matrix scalar(double v);
  // Uniform values in [lo, hi), drawn row-major so layouts are reproducible.
  static Matrix uniform(int r, int c, std::mt19937_64& rng, double lo = -0.1,
                        double hi = 0.1);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  bool is_scalar() const { return rows == 1 && cols == 1; }

  void fill(double v);
  void set_zero() { fill(0.0); }
  bool all_finite() const;

  double item() const;  // value of a 1x1 matrix

  std::string shape_str() const;
};

bool operator==(const Matrix& a, const Matrix& b);

// Largest absolute element difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Throws std::invalid_argument naming the operation and both shapes.
[[noreturn]] void throw_shape_error(const std::string& op, const Matrix& a,
                                    const Matrix& b);
[[noreturn]] void throw_shape_error(const std::string& op, const Matrix& a);

}  // namespace misca
