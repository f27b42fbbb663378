#include "misca/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "misca/kernels.hpp"

namespace misca {

namespace {

double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

double Parameter::grad_l2() const {
  double s = 0.0;
  for (double g : grad.data) s += g * g;
  return std::sqrt(s);
}

Value Tape::push(Matrix val, bool needs_grad,
                 std::function<void(Tape&, int)> back) {
  Node n;
  n.val = std::move(val);
  n.back = std::move(back);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  const int idx = static_cast<int>(nodes_.size()) - 1;
  return Value{this, idx, nodes_.back().val.rows, nodes_.back().val.cols};
}

void Tape::check_same_tape(Value v) const {
  if (!v.valid() || v.tape != this ||
      v.idx >= static_cast<int>(nodes_.size())) {
    throw std::logic_error("Tape: value does not belong to this tape");
  }
}

Value Tape::leaf(Parameter& p) {
  Value v = push(p.value, true, [](Tape& t, int self) {
    Node& n = t.node(self);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      n.param->grad.data[i] += n.grad.data[i];
    }
  });
  nodes_.back().param = &p;
  return v;
}

Value Tape::input(Matrix m) { return push(std::move(m), false, nullptr); }

const Matrix& Tape::val(Value v) const {
  check_same_tape(v);
  return node(v.idx).val;
}

const Matrix& Tape::grad(Value v) const {
  check_same_tape(v);
  return node(v.idx).grad;
}

void Tape::reset() { nodes_.clear(); }

Value Tape::matmul(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  Matrix out;
  kernels::matmul(node(a.idx).val, node(b.idx).val, out);
  const bool ng = wants(a.idx) || wants(b.idx);
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), ng, [ai, bi](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    if (t.wants(ai)) {
      kernels::matmul_nt_acc(g, t.node(bi).val, t.grad_ref(ai));
    }
    if (t.wants(bi)) {
      kernels::matmul_tn_acc(t.node(ai).val, g, t.grad_ref(bi));
    }
  });
}

Value Tape::transpose(Value a) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
  }
  const int ai = a.idx;
  return push(std::move(out), wants(a.idx), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) da.at(j, i) += g.at(i, j);
    }
  });
}

Value Tape::add(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& ma = node(a.idx).val;
  const Matrix& mb = node(b.idx).val;
  if (!ma.same_shape(mb)) throw_shape_error("add", ma, mb);
  Matrix out(ma.rows, ma.cols);
  for (size_t i = 0; i < ma.data.size(); ++i) {
    out.data[i] = ma.data[i] + mb.data[i];
  }
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), wants(ai) || wants(bi),
              [ai, bi](Tape& t, int self) {
                const Matrix& g = t.node(self).grad;
                for (int p : {ai, bi}) {
                  if (!t.wants(p)) continue;
                  Matrix& d = t.grad_ref(p);
                  for (size_t i = 0; i < g.data.size(); ++i) {
                    d.data[i] += g.data[i];
                  }
                }
              });
}

Value Tape::mul(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& ma = node(a.idx).val;
  const Matrix& mb = node(b.idx).val;
  if (!ma.same_shape(mb)) throw_shape_error("mul", ma, mb);
  Matrix out(ma.rows, ma.cols);
  for (size_t i = 0; i < ma.data.size(); ++i) {
    out.data[i] = ma.data[i] * mb.data[i];
  }
  const int ai = a.idx, bi = b.idx;
  return push(std::move(out), wants(ai) || wants(bi),
              [ai, bi](Tape& t, int self) {
                const Matrix& g = t.node(self).grad;
                if (t.wants(ai)) {
                  Matrix& da = t.grad_ref(ai);
                  const Matrix& vb = t.node(bi).val;
                  for (size_t i = 0; i < g.data.size(); ++i) {
                    da.data[i] += g.data[i] * vb.data[i];
                  }
                }
                if (t.wants(bi)) {
                  Matrix& db = t.grad_ref(bi);
                  const Matrix& va = t.node(ai).val;
                  for (size_t i = 0; i < g.data.size(); ++i) {
                    db.data[i] += g.data[i] * va.data[i];
                  }
                }
              });
}

Value Tape::scale(Value a, double c) {
  check_same_tape(a);
  const Matrix& ma = node(a.idx).val;
  Matrix out(ma.rows, ma.cols);
  for (size_t i = 0; i < ma.data.size(); ++i) out.data[i] = c * ma.data[i];
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai, c](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += c * g.data[i];
  });
}

Value Tape::tanh(Value a) {
  check_same_tape(a);
  Matrix out;
  kernels::tanh_forward(node(a.idx).val, out);
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Node& n = t.node(self);
    Matrix& da = t.grad_ref(ai);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      const double y = n.val.data[i];
      da.data[i] += n.grad.data[i] * (1.0 - y * y);
    }
  });
}

Value Tape::sigmoid(Value a) {
  check_same_tape(a);
  Matrix out;
  kernels::sigmoid_forward(node(a.idx).val, out);
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Node& n = t.node(self);
    Matrix& da = t.grad_ref(ai);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      const double y = n.val.data[i];
      da.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

namespace {

// dX = Y * (dY - rowwise(sum(Y * dY))) for a row-wise softmax Y.
void softmax_rows_backward(const Matrix& y, const Matrix& gy, Matrix& gx) {
  for (int i = 0; i < y.rows; ++i) {
    double dot = 0.0;
    for (int j = 0; j < y.cols; ++j) dot += y.at(i, j) * gy.at(i, j);
    for (int j = 0; j < y.cols; ++j) {
      gx.at(i, j) += y.at(i, j) * (gy.at(i, j) - dot);
    }
  }
}

}  // namespace

Value Tape::softmax_rows(Value a, const Matrix* mask) {
  check_same_tape(a);
  Matrix out;
  kernels::softmax_rows(node(a.idx).val, mask, out);
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Node& n = t.node(self);
    softmax_rows_backward(n.val, n.grad, t.grad_ref(ai));
  });
}

Value Tape::softmax_cols(Value a) {
  check_same_tape(a);
  Matrix out;
  kernels::softmax_cols(node(a.idx).val, out);
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Node& n = t.node(self);
    Matrix& gx = t.grad_ref(ai);
    for (int j = 0; j < n.val.cols; ++j) {
      double dot = 0.0;
      for (int i = 0; i < n.val.rows; ++i) {
        dot += n.val.at(i, j) * n.grad.at(i, j);
      }
      for (int i = 0; i < n.val.rows; ++i) {
        gx.at(i, j) += n.val.at(i, j) * (n.grad.at(i, j) - dot);
      }
    }
  });
}

Value Tape::concat_rows(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& ma = node(a.idx).val;
  const Matrix& mb = node(b.idx).val;
  if (ma.cols != mb.cols) throw_shape_error("concat_rows", ma, mb);
  Matrix out(ma.rows + mb.rows, ma.cols);
  std::copy(ma.data.begin(), ma.data.end(), out.data.begin());
  std::copy(mb.data.begin(), mb.data.end(), out.data.begin() + ma.size());
  const int ai = a.idx, bi = b.idx, split = ma.rows;
  return push(std::move(out), wants(ai) || wants(bi),
              [ai, bi, split](Tape& t, int self) {
                const Matrix& g = t.node(self).grad;
                if (t.wants(ai)) {
                  Matrix& da = t.grad_ref(ai);
                  for (size_t i = 0; i < da.data.size(); ++i) {
                    da.data[i] += g.data[i];
                  }
                }
                if (t.wants(bi)) {
                  Matrix& db = t.grad_ref(bi);
                  const size_t off = static_cast<size_t>(split) * g.cols;
                  for (size_t i = 0; i < db.data.size(); ++i) {
                    db.data[i] += g.data[off + i];
                  }
                }
              });
}

Value Tape::concat_cols(std::span<const Value> parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_cols: empty input list");
  }
  int total = 0;
  const int rows = node(parts[0].idx).val.rows;
  std::vector<int> idxs;
  idxs.reserve(parts.size());
  bool ng = false;
  for (Value p : parts) {
    check_same_tape(p);
    const Matrix& m = node(p.idx).val;
    if (m.rows != rows) throw_shape_error("concat_cols", node(parts[0].idx).val, m);
    total += m.cols;
    ng = ng || wants(p.idx);
    idxs.push_back(p.idx);
  }
  Matrix out(rows, total);
  int c0 = 0;
  for (int pi : idxs) {
    const Matrix& m = node(pi).val;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < m.cols; ++j) out.at(i, c0 + j) = m.at(i, j);
    }
    c0 += m.cols;
  }
  return push(std::move(out), ng, [idxs](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    int c0 = 0;
    for (int pi : idxs) {
      const int w = t.node(pi).val.cols;
      if (t.wants(pi)) {
        Matrix& d = t.grad_ref(pi);
        for (int i = 0; i < g.rows; ++i) {
          for (int j = 0; j < w; ++j) d.at(i, j) += g.at(i, c0 + j);
        }
      }
      c0 += w;
    }
  });
}

Value Tape::concat_cols(Value a, Value b) {
  const Value parts[] = {a, b};
  return concat_cols(std::span<const Value>(parts, 2));
}

Value Tape::slice_rows(Value a, int r0, int nrows) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  if (r0 < 0 || nrows <= 0 || r0 + nrows > m.rows) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(r0) +
                                ", " + std::to_string(r0 + nrows) +
                                ") out of " + m.shape_str());
  }
  Matrix out(nrows, m.cols);
  for (int i = 0; i < nrows; ++i) {
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(r0 + i, j);
  }
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai, r0](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) da.at(r0 + i, j) += g.at(i, j);
    }
  });
}

Value Tape::slice_cols(Value a, int c0, int ncols) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  if (c0 < 0 || ncols <= 0 || c0 + ncols > m.cols) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) +
                                ", " + std::to_string(c0 + ncols) +
                                ") out of " + m.shape_str());
  }
  Matrix out(m.rows, ncols);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < ncols; ++j) out.at(i, j) = m.at(i, c0 + j);
  }
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai, c0](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) da.at(i, c0 + j) += g.at(i, j);
    }
  });
}

Value Tape::repeat_col(Value a, int times) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  if (m.cols != 1 || times <= 0) throw_shape_error("repeat_col", m);
  Matrix out(m.rows, times);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < times; ++j) out.at(i, j) = m.at(i, 0);
  }
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (int i = 0; i < g.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < g.cols; ++j) s += g.at(i, j);
      da.at(i, 0) += s;
    }
  });
}

Value Tape::col_sums(Value a) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  Matrix out(1, m.cols);
  for (int j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += m.at(i, j);
    out.at(0, j) = s;
  }
  const int ai = a.idx;
  return push(std::move(out), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& da = t.grad_ref(ai);
    for (int i = 0; i < da.rows; ++i) {
      for (int j = 0; j < da.cols; ++j) da.at(i, j) += g.at(0, j);
    }
  });
}

Value Tape::sum_all(Value a) {
  check_same_tape(a);
  const Matrix& m = node(a.idx).val;
  double s = 0.0;
  for (double v : m.data) s += v;
  const int ai = a.idx;
  return push(Matrix::scalar(s), wants(ai), [ai](Tape& t, int self) {
    if (!t.wants(ai)) return;
    const double g = t.node(self).grad.data[0];
    Matrix& da = t.grad_ref(ai);
    for (auto& v : da.data) v += g;
  });
}

Value Tape::rows_lookup(Value table, const std::vector<int>& ids) {
  check_same_tape(table);
  const Matrix& m = node(table.idx).val;
  Matrix out(static_cast<int>(ids.size()), m.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    const int r = ids[i];
    if (r < 0 || r >= m.rows) {
      throw std::out_of_range("rows_lookup: id " + std::to_string(r) +
                              " outside table " + m.shape_str());
    }
    for (int j = 0; j < m.cols; ++j) {
      out.at(static_cast<int>(i), j) = m.at(r, j);
    }
  }
  const int ti = table.idx;
  return push(std::move(out), wants(table.idx), [ti, ids](Tape& t, int self) {
    if (!t.wants(ti)) return;
    const Matrix& g = t.node(self).grad;
    Matrix& dt = t.grad_ref(ti);
    for (size_t i = 0; i < ids.size(); ++i) {
      for (int j = 0; j < g.cols; ++j) {
        dt.at(ids[i], j) += g.at(static_cast<int>(i), j);
      }
    }
  });
}

Value Tape::embed(Parameter& table, const std::vector<int>& ids) {
  const Matrix& m = table.value;
  Matrix out(static_cast<int>(ids.size()), m.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    const int r = ids[i];
    if (r < 0 || r >= m.rows) {
      throw std::out_of_range("embed: id " + std::to_string(r) +
                              " outside table " + m.shape_str());
    }
    for (int j = 0; j < m.cols; ++j) {
      out.at(static_cast<int>(i), j) = m.at(r, j);
    }
  }
  Parameter* tb = &table;
  return push(std::move(out), true, [tb, ids](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    for (size_t i = 0; i < ids.size(); ++i) {
      for (int j = 0; j < g.cols; ++j) {
        tb->grad.at(ids[i], j) += g.at(static_cast<int>(i), j);
      }
    }
  });
}

Value Tape::bce_with_logits(Value logits, const Matrix& targets) {
  check_same_tape(logits);
  const Matrix& x = node(logits.idx).val;
  if (!x.same_shape(targets)) throw_shape_error("bce_with_logits", x, targets);
  double loss = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double xi = x.data[i];
    const double yi = targets.data[i];
    loss += std::max(xi, 0.0) - xi * yi + std::log1p(std::exp(-std::fabs(xi)));
  }
  const int li = logits.idx;
  return push(Matrix::scalar(loss), wants(logits.idx),
              [li, targets](Tape& t, int self) {
                if (!t.wants(li)) return;
                const double g = t.node(self).grad.data[0];
                const Matrix& x = t.node(li).val;
                Matrix& dx = t.grad_ref(li);
                for (size_t i = 0; i < x.data.size(); ++i) {
                  const double s = 1.0 / (1.0 + std::exp(-x.data[i]));
                  dx.data[i] += g * (s - targets.data[i]);
                }
              });
}

Value Tape::ce_with_logits(Value logits, int gold_index) {
  check_same_tape(logits);
  const Matrix& x = node(logits.idx).val;
  if (x.cols != 1) throw_shape_error("ce_with_logits", x);
  if (gold_index < 0 || gold_index >= x.rows) {
    throw std::out_of_range("ce_with_logits: gold index " +
                            std::to_string(gold_index) + " outside " +
                            x.shape_str());
  }
  const double lse = logsumexp(x.data);
  const double loss = lse - x.data[static_cast<size_t>(gold_index)];
  const int li = logits.idx;
  return push(Matrix::scalar(loss), wants(logits.idx),
              [li, gold_index](Tape& t, int self) {
                if (!t.wants(li)) return;
                const double g = t.node(self).grad.data[0];
                const Matrix& x = t.node(li).val;
                Matrix& dx = t.grad_ref(li);
                const double lse = logsumexp(x.data);
                for (int i = 0; i < x.rows; ++i) {
                  double p = std::exp(x.data[i] - lse);
                  if (i == gold_index) p -= 1.0;
                  dx.data[i] += g * p;
                }
              });
}

Value Tape::crf_nll(Value emissions, Value transitions,
                    const std::vector<int>& gold) {
  check_same_tape(emissions);
  check_same_tape(transitions);
  const Matrix& e = node(emissions.idx).val;
  const Matrix& tr = node(transitions.idx).val;
  const int k = e.rows;
  const int n = e.cols;
  if (tr.rows != k + 2 || tr.cols != k + 2) {
    throw_shape_error("crf_nll(transitions)", e, tr);
  }
  if (static_cast<int>(gold.size()) != n || n < 1) {
    throw std::invalid_argument("crf_nll: gold length " +
                                std::to_string(gold.size()) +
                                " does not match emissions " + e.shape_str());
  }
  for (int t = 0; t < n; ++t) {
    if (gold[t] < 0 || gold[t] >= k) {
      throw std::out_of_range("crf_nll: gold tag " + std::to_string(gold[t]) +
                              " outside [0, " + std::to_string(k) + ")");
    }
  }
  const int start = k, end = k + 1;

  // Forward recursion in log space.
  Matrix alpha(k, n);
  std::vector<double> tmp(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) alpha.at(j, 0) = tr.at(start, j) + e.at(j, 0);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) {
        tmp[static_cast<size_t>(i)] = alpha.at(i, t - 1) + tr.at(i, j);
      }
      alpha.at(j, t) = logsumexp(tmp) + e.at(j, t);
    }
  }
  for (int j = 0; j < k; ++j) {
    tmp[static_cast<size_t>(j)] = alpha.at(j, n - 1) + tr.at(j, end);
  }
  const double log_z = logsumexp(tmp);

  double gold_score = tr.at(start, gold[0]) + e.at(gold[0], 0);
  for (int t = 1; t < n; ++t) {
    gold_score += tr.at(gold[t - 1], gold[t]) + e.at(gold[t], t);
  }
  gold_score += tr.at(gold[n - 1], end);

  const double loss = log_z - gold_score;
  const int ei = emissions.idx, ti = transitions.idx;
  const bool ng = wants(ei) || wants(ti);
  return push(
      Matrix::scalar(loss), ng,
      [ei, ti, gold, alpha, log_z](Tape& t, int self) {
        const double go = t.node(self).grad.data[0];
        const Matrix& e = t.node(ei).val;
        const Matrix& tr = t.node(ti).val;
        const int k = e.rows;
        const int n = e.cols;
        const int start = k, end = k + 1;

        // Backward recursion for marginals.
        Matrix beta(k, n);
        std::vector<double> tmp(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) beta.at(i, n - 1) = tr.at(i, end);
        for (int s = n - 2; s >= 0; --s) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              tmp[static_cast<size_t>(j)] =
                  tr.at(i, j) + e.at(j, s + 1) + beta.at(j, s + 1);
            }
            beta.at(i, s) = logsumexp(tmp);
          }
        }

        if (t.wants(ei)) {
          Matrix& de = t.grad_ref(ei);
          for (int s = 0; s < n; ++s) {
            for (int j = 0; j < k; ++j) {
              double m = std::exp(alpha.at(j, s) + beta.at(j, s) - log_z);
              if (gold[static_cast<size_t>(s)] == j) m -= 1.0;
              de.at(j, s) += go * m;
            }
          }
        }
        if (t.wants(ti)) {
          Matrix& dt = t.grad_ref(ti);
          for (int j = 0; j < k; ++j) {
            double m = std::exp(alpha.at(j, 0) + beta.at(j, 0) - log_z);
            if (gold[0] == j) m -= 1.0;
            dt.at(start, j) += go * m;
          }
          for (int s = 0; s + 1 < n; ++s) {
            for (int i = 0; i < k; ++i) {
              for (int j = 0; j < k; ++j) {
                double m = std::exp(alpha.at(i, s) + tr.at(i, j) +
                                    e.at(j, s + 1) + beta.at(j, s + 1) -
                                    log_z);
                if (gold[static_cast<size_t>(s)] == i &&
                    gold[static_cast<size_t>(s + 1)] == j) {
                  m -= 1.0;
                }
                dt.at(i, j) += go * m;
              }
            }
          }
          for (int i = 0; i < k; ++i) {
            double m = std::exp(alpha.at(i, n - 1) + tr.at(i, end) - log_z);
            if (gold[static_cast<size_t>(n - 1)] == i) m -= 1.0;
            dt.at(i, end) += go * m;
          }
        }
      });
}

void Tape::backward(Value scalar_loss) {
  check_same_tape(scalar_loss);
  const int loss_idx = scalar_loss.idx;
  Node& loss = node(loss_idx);
  if (!loss.val.is_scalar()) {
    throw std::invalid_argument("backward: loss must be 1x1, got " +
                                loss.val.shape_str());
  }
  for (int i = 0; i <= loss_idx; ++i) {
    Node& n = node(i);
    if (!n.needs_grad) continue;
    if (!n.grad.same_shape(n.val)) {
      n.grad = Matrix::zeros(n.val.rows, n.val.cols);
    } else {
      n.grad.set_zero();
    }
  }
  if (!loss.needs_grad) return;  // constant loss: all gradients are zero
  loss.grad.data[0] = 1.0;
  for (int i = loss_idx; i >= 0; --i) {
    Node& n = node(i);
    if (n.needs_grad && n.back) n.back(*this, i);
  }
}

// ---- Gradient checking -------------------------------------------------

GradCheckReport gradcheck(const std::function<Value(Tape&)>& f,
                          std::span<Parameter* const> params, double step,
                          double tol) {
  if (step <= 0.0) throw std::invalid_argument("gradcheck: step must be > 0");

  Tape tape;
  for (Parameter* p : params) p->reset_grad();
  Value loss = f(tape);
  tape.backward(loss);

  std::vector<Matrix> taped;
  taped.reserve(params.size());
  for (Parameter* p : params) taped.push_back(p->grad);

  const auto eval = [&]() {
    Tape t2;
    return t2.val(f(t2)).item();
  };

  GradCheckReport report;
  report.tol = tol;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    GradCheckEntry entry;
    entry.name = p.name;
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      const double saved = p.value.data[i];
      p.value.data[i] = saved + step;
      const double up = eval();
      p.value.data[i] = saved - step;
      const double down = eval();
      p.value.data[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double g = taped[pi].data[i];
      const double abs_err = std::fabs(g - fd);
      const double rel =
          abs_err / std::max({std::fabs(g), std::fabs(fd), 0.01});
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_parameter.push_back(std::move(entry));
  }
  return report;
}

std::string GradCheckReport::summary(double tol) const {
  std::ostringstream os;
  for (const auto& e : per_parameter) {
    os << (e.max_rel_err <= tol ? "ok  " : "FAIL") << "  " << e.name
       << "  max_rel_err=" << e.max_rel_err << "  max_abs_err=" << e.max_abs_err
       << "\n";
  }
  os << (passed(tol) ? "PASS" : "FAIL") << "  max_rel_err=" << max_rel_err
     << "  tol=" << tol << "\n";
  return os.str();
}

}  // namespace misca
