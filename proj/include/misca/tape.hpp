#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "misca/matrix.hpp"

namespace misca {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid until the tape is reset.
struct Value {
  Tape* tape = nullptr;
  int idx = -1;
  int rows = 0;
  int cols = 0;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

// A trainable tensor. `grad` accumulates additively across backward calls
// until reset_grad(); it always has the same shape as `value`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::zeros(value.rows, value.cols)) {}

  void reset_grad() { grad.set_zero(); }
  double grad_l2() const;
};

// Reverse-mode gradient tape (Wengert list). Nodes are recorded in
// construction order; backward() sweeps them in reverse. Single-threaded:
// one tape per training step. All loops use a fixed summation order, so a
// given graph produces bit-identical values and gradients across runs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf; backward() adds into p.grad.
  Value leaf(Parameter& p);
  // Non-trainable input.
  Value input(Matrix m);

  Value matmul(Value a, Value b);
  Value transpose(Value a);
  Value add(Value a, Value b);
  Value mul(Value a, Value b);  // elementwise
  Value scale(Value a, double c);
  Value tanh(Value a);
  Value sigmoid(Value a);
  // mask: optional 1 x cols validity row; masked columns get probability 0.
  Value softmax_rows(Value a, const Matrix* mask = nullptr);
  Value softmax_cols(Value a);
  Value concat_rows(Value a, Value b);
  Value concat_cols(std::span<const Value> parts);
  Value concat_cols(Value a, Value b);
  Value slice_rows(Value a, int r0, int nrows);
  Value slice_cols(Value a, int c0, int ncols);
  Value repeat_col(Value a, int times);  // a is d x 1 -> d x times
  Value col_sums(Value a);               // 1 x cols
  Value sum_all(Value a);                // 1 x 1
  // Select rows of an embedding table; out is ids.size() x table.cols.
  Value rows_lookup(Value table, const std::vector<int>& ids);
  // Same selection but straight from a Parameter, without materializing the
  // whole table as a node; gradients scatter-add into table.grad.
  Value embed(Parameter& table, const std::vector<int>& ids);

  // Summed binary cross entropy over all elements, numerically stable in
  // the logits. targets entries must be in [0, 1].
  Value bce_with_logits(Value logits, const Matrix& targets);
  // Multi-class cross entropy for a single K x 1 logit column.
  Value ce_with_logits(Value logits, int gold_index);
  // Negative log-likelihood of a linear-chain CRF. emissions is K x n,
  // transitions is (K+2) x (K+2) with virtual start row K and end column
  // K+1. gold holds n tag indices in [0, K).
  Value crf_nll(Value emissions, Value transitions,
                const std::vector<int>& gold);

  const Matrix& val(Value v) const;
  // Gradient of the last backward() w.r.t. this node.
  const Matrix& grad(Value v) const;

  // Reverse sweep from a scalar loss; accumulates into Parameter grads.
  void backward(Value scalar_loss);

  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void(Tape&, int)> back;  // (tape, self index)
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Value push(Matrix val, bool needs_grad,
             std::function<void(Tape&, int)> back);
  Node& node(int i) { return nodes_[static_cast<size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<size_t>(i)]; }
  Matrix& grad_ref(int i) { return nodes_[static_cast<size_t>(i)].grad; }
  bool wants(int i) const { return nodes_[static_cast<size_t>(i)].needs_grad; }
  void check_same_tape(Value v) const;

  std::vector<Node> nodes_;
};

// ---- Gradient checking -------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_parameter;
  double max_rel_err = 0.0;
  double tol = 1e-4;  // threshold the report was run with
  bool passed() const { return max_rel_err <= tol; }
  bool passed(double t) const { return max_rel_err <= t; }
  std::string summary() const { return summary(tol); }
  std::string summary(double t) const;
};

// Compares the taped gradient of f against central finite differences
// (f(t+h) - f(t-h)) / 2h for every element of every parameter. Relative
// error uses |g - fd| / max(|g|, |fd|, 0.01); the floor keeps near-zero
// gradients from inflating the ratio past finite-difference noise.
GradCheckReport gradcheck(const std::function<Value(Tape&)>& f,
                          std::span<Parameter* const> params, double step,
                          double tol);

}  // namespace misca
