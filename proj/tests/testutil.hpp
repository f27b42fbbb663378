#pragma once

// Independent oracles used by the tests. Everything here is written
// directly from first principles (naive loops, explicit recurrences,
// exhaustive enumeration) and stays independent of the library code paths
// it checks.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "misca/matrix.hpp"

namespace testutil {

using misca::Matrix;

// Naive triple-loop matrix product.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

// Reference LSTM recurrence (input/forget/cell/output gate rows), written
// out scalar by scalar. Returns hidden states as columns, one per step, in
// input order.
inline Matrix reference_lstm(const Matrix& w_in, const Matrix& w_rec,
                             const Matrix& bias, const Matrix& seq) {
  const int h = w_rec.cols;
  const int n = seq.cols;
  Matrix out(h, n);
  std::vector<double> hidden(static_cast<size_t>(h), 0.0);
  std::vector<double> cell(static_cast<size_t>(h), 0.0);
  for (int t = 0; t < n; ++t) {
    std::vector<double> pre(static_cast<size_t>(4 * h), 0.0);
    for (int r = 0; r < 4 * h; ++r) {
      double acc = 0.0;
      for (int k = 0; k < seq.rows; ++k) acc += w_in.at(r, k) * seq.at(k, t);
      for (int k = 0; k < h; ++k) {
        acc += w_rec.at(r, k) * hidden[static_cast<size_t>(k)];
      }
      pre[static_cast<size_t>(r)] = acc + bias.at(r, 0);
    }
    for (int j = 0; j < h; ++j) {
      const double gi = 1.0 / (1.0 + std::exp(-pre[static_cast<size_t>(j)]));
      const double gf =
          1.0 / (1.0 + std::exp(-pre[static_cast<size_t>(h + j)]));
      const double gc = std::tanh(pre[static_cast<size_t>(2 * h + j)]);
      const double go =
          1.0 / (1.0 + std::exp(-pre[static_cast<size_t>(3 * h + j)]));
      cell[static_cast<size_t>(j)] = gf * cell[static_cast<size_t>(j)] + gi * gc;
      hidden[static_cast<size_t>(j)] = go * std::tanh(cell[static_cast<size_t>(j)]);
      out.at(j, t) = hidden[static_cast<size_t>(j)];
    }
  }
  return out;
}

inline Matrix reverse_cols(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out.at(i, m.cols - 1 - j) = m.at(i, j);
  }
  return out;
}

// Second, independently written BIO span extractor: returns
// "begin:end:label" strings. An I-x that cannot attach to a running x span
// starts a new span.
inline std::vector<std::string> spans_oracle(
    const std::vector<std::string>& tags) {
  std::vector<std::string> spans;
  int start = -1;
  std::string label;
  auto close = [&](int end) {
    if (start >= 0) {
      spans.push_back(std::to_string(start) + ":" + std::to_string(end) + ":" +
                      label);
    }
    start = -1;
    label.clear();
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& t = tags[static_cast<size_t>(i)];
    if (t == "O") {
      close(i);
    } else if (t[0] == 'B') {
      close(i);
      start = i;
      label = t.substr(2);
    } else {  // I-
      if (start < 0 || label != t.substr(2)) {
        close(i);
        start = i;
        label = t.substr(2);
      }
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

// Exhaustive linear-chain CRF reference: scores every one of the K^n paths
// explicitly. Transitions use the same (K+2) x (K+2) layout with virtual
// start row K and end column K+1.
struct CrfEnumeration {
  double log_z = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<int> best_path;
};

inline double enum_path_score(const Matrix& emissions, const Matrix& trans,
                              const std::vector<int>& path) {
  const int k = emissions.rows;
  double s = trans.at(k, path[0]) + emissions.at(path[0], 0);
  for (size_t t = 1; t < path.size(); ++t) {
    s += trans.at(path[t - 1], path[t]) +
         emissions.at(path[t], static_cast<int>(t));
  }
  s += trans.at(path.back(), k + 1);
  return s;
}

inline CrfEnumeration enumerate_crf(const Matrix& emissions,
                                    const Matrix& trans) {
  const int k = emissions.rows;
  const int n = emissions.cols;
  CrfEnumeration out;
  std::vector<int> path(static_cast<size_t>(n), 0);
  std::vector<double> scores;
  while (true) {
    const double s = enum_path_score(emissions, trans, path);
    scores.push_back(s);
    if (s > out.best_score) {
      out.best_score = s;
      out.best_path = path;
    }
    int pos = n - 1;
    while (pos >= 0 && ++path[static_cast<size_t>(pos)] == k) {
      path[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  out.log_z = mx + std::log(sum);
  return out;
}

}  // namespace testutil
