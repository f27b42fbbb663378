#include "misca/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace misca::kernels {

namespace {

// Parallelizing tiny matrices costs more than it saves.
constexpr long kParallelThreshold = 16 * 1024;

void check_matmul(const Matrix& a, const Matrix& b, const char* op,
                  int need_a_cols_eq_b_rows) {
  (void)need_a_cols_eq_b_rows;
  if (a.cols != b.rows) throw_shape_error(op, a, b);
}

inline double row_dot(const double* ar, const Matrix& b, int j, int k_count) {
  // Fixed k-ascending accumulation; shared by all matmul variants.
  double acc = 0.0;
  for (int k = 0; k < k_count; ++k) {
    acc += ar[k] * b.data[static_cast<size_t>(k) * b.cols + j];
  }
  return acc;
}

// Inputs are validated before the parallel loops; nothing below may throw
// from inside an OpenMP region.
void softmax_row_span(const double* in, const double* mask, int n,
                      double* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    if (mask && mask[j] == 0.0) continue;
    mx = std::max(mx, in[j]);
  }
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    if (mask && mask[j] == 0.0) {
      out[j] = 0.0;
    } else {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
  }
  for (int j = 0; j < n; ++j) out[j] /= sum;
}

void check_softmax_input(const Matrix& in, const Matrix* mask,
                         const char* op) {
  if (mask) {
    if (mask->rows != 1 || mask->cols != in.cols) {
      throw_shape_error(std::string(op) + "(mask)", in, *mask);
    }
    bool any_valid = false;
    for (double m : mask->data) any_valid = any_valid || m != 0.0;
    if (!any_valid) {
      throw std::invalid_argument(std::string(op) + ": fully masked input");
    }
  }
  if (!in.all_finite()) {
    throw std::invalid_argument(std::string(op) + ": non-finite input");
  }
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, "matmul", 0);
  out = Matrix(a.rows, b.cols);
  const long work = static_cast<long>(a.rows) * b.cols * a.cols;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int j = 0; j < b.cols; ++j) {
      orow[j] = row_dot(ar, b, j, a.cols);
    }
  }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  // out(i,j) += sum_k a(i,k) * b(j,k)
  if (a.cols != b.cols) throw_shape_error("matmul_nt_acc", a, b);
  if (out.rows != a.rows || out.cols != b.rows) {
    throw_shape_error("matmul_nt_acc(out)", out, a);
  }
  const long work = static_cast<long>(a.rows) * b.rows * a.cols;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* br = &b.data[static_cast<size_t>(j) * b.cols];
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
      orow[j] += acc;
    }
  }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  // out(i,j) += sum_k a(k,i) * b(k,j)
  if (a.rows != b.rows) throw_shape_error("matmul_tn_acc", a, b);
  if (out.rows != a.cols || out.cols != b.cols) {
    throw_shape_error("matmul_tn_acc(out)", out, a);
  }
  const long work = static_cast<long>(a.cols) * b.cols * a.rows;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (int i = 0; i < a.cols; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) {
        acc += a.data[static_cast<size_t>(k) * a.cols + i] *
               b.data[static_cast<size_t>(k) * b.cols + j];
      }
      orow[j] += acc;
    }
  }
}

void softmax_rows(const Matrix& in, const Matrix* mask, Matrix& out) {
  check_softmax_input(in, mask, "softmax_rows");
  out = Matrix(in.rows, in.cols);
  const double* m = mask ? mask->data.data() : nullptr;
#pragma omp parallel for schedule(static) if (in.size() > kParallelThreshold)
  for (int i = 0; i < in.rows; ++i) {
    softmax_row_span(&in.data[static_cast<size_t>(i) * in.cols], m, in.cols,
                     &out.data[static_cast<size_t>(i) * in.cols]);
  }
}

void softmax_cols(const Matrix& in, Matrix& out) {
  check_softmax_input(in, nullptr, "softmax_cols");
  out = Matrix(in.rows, in.cols);
#pragma omp parallel for schedule(static) if (in.size() > kParallelThreshold)
  for (int j = 0; j < in.cols; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < in.rows; ++i) mx = std::max(mx, in.at(i, j));
    double sum = 0.0;
    for (int i = 0; i < in.rows; ++i) {
      double e = std::exp(in.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int i = 0; i < in.rows; ++i) out.at(i, j) /= sum;
  }
}

void tanh_forward(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  const long n = static_cast<long>(in.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) out.data[i] = std::tanh(in.data[i]);
}

void sigmoid_forward(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  const long n = static_cast<long>(in.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) out.data[i] = 1.0 / (1.0 + std::exp(-in.data[i]));
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, "serial::matmul", 0);
  out = Matrix(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      out.at(i, j) = acc;
    }
  }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.cols) throw_shape_error("serial::matmul_nt_acc", a, b);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(j, k);
      out.at(i, j) += acc;
    }
  }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows) throw_shape_error("serial::matmul_tn_acc", a, b);
  for (int i = 0; i < a.cols; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      out.at(i, j) += acc;
    }
  }
}

void softmax_rows(const Matrix& in, const Matrix* mask, Matrix& out) {
  check_softmax_input(in, mask, "serial::softmax_rows");
  out = Matrix(in.rows, in.cols);
  const double* m = mask ? mask->data.data() : nullptr;
  for (int i = 0; i < in.rows; ++i) {
    softmax_row_span(&in.data[static_cast<size_t>(i) * in.cols], m, in.cols,
                     &out.data[static_cast<size_t>(i) * in.cols]);
  }
}

void softmax_cols(const Matrix& in, Matrix& out) {
  check_softmax_input(in, nullptr, "serial::softmax_cols");
  out = Matrix(in.rows, in.cols);
  for (int j = 0; j < in.cols; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < in.rows; ++i) mx = std::max(mx, in.at(i, j));
    double sum = 0.0;
    for (int i = 0; i < in.rows; ++i) {
      double e = std::exp(in.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int i = 0; i < in.rows; ++i) out.at(i, j) /= sum;
  }
}

void tanh_forward(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  for (size_t i = 0; i < in.size(); ++i) out.data[i] = std::tanh(in.data[i]);
}

void sigmoid_forward(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  for (size_t i = 0; i < in.size(); ++i) {
    out.data[i] = 1.0 / (1.0 + std::exp(-in.data[i]));
  }
}

}  // namespace serial

}  // namespace misca::kernels
