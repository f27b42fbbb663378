#pragma once

#include "misca/matrix.hpp"

namespace misca::kernels {

// Dense kernels used by the tape. The OpenMP versions parallelize over
// independent output elements only; every output element is accumulated in
// the same fixed k-ascending order as the serial reference, so results are
// bitwise identical to `serial::` regardless of thread count. No floating
// point OpenMP reductions anywhere.

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);

// Row-wise softmax with max subtraction. `mask` is optional (1 x cols,
// nonzero = valid); masked columns get probability exactly 0. A fully
// masked row is a contract violation.
void softmax_rows(const Matrix& in, const Matrix* mask, Matrix& out);
// Column-wise softmax with max subtraction (no masking needed by callers).
void softmax_cols(const Matrix& in, Matrix& out);

void tanh_forward(const Matrix& in, Matrix& out);
void sigmoid_forward(const Matrix& in, Matrix& out);

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);
void softmax_rows(const Matrix& in, const Matrix* mask, Matrix& out);
void softmax_cols(const Matrix& in, Matrix& out);
void tanh_forward(const Matrix& in, Matrix& out);
void sigmoid_forward(const Matrix& in, Matrix& out);
}  // namespace serial

}  // namespace misca::kernels
