#include "misca/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace misca {

IntentScores intent_scores(Tape& tape, IntentHeadParams& params,
                           Value label_matrix, Value v_intent) {
  Value logits = tape.transpose(
      tape.col_sums(tape.mul(tape.leaf(params.label_weights), label_matrix)));
  Value pooled = tape.matmul(tape.transpose(v_intent),
                             tape.leaf(params.count_feature));
  Value count_logits = tape.matmul(tape.leaf(params.count_weights), pooled);
  return {logits, count_logits};
}

IntentPrediction predict_intents(const Matrix& probs,
                                 const Matrix& count_logits) {
  if (probs.cols != 1 || count_logits.cols != 1) {
    throw_shape_error("predict_intents", probs, count_logits);
  }
  IntentPrediction pred;
  pred.probs = probs.data;

  int best = 0;
  for (int i = 1; i < count_logits.rows; ++i) {
    if (count_logits.data[static_cast<size_t>(i)] >
        count_logits.data[static_cast<size_t>(best)]) {
      best = i;
    }
  }
  pred.count = std::min(best + 1, probs.rows);

  std::vector<int> order(static_cast<size_t>(probs.rows));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs.data[static_cast<size_t>(a)] >
           probs.data[static_cast<size_t>(b)];
  });
  pred.labels.assign(order.begin(), order.begin() + pred.count);
  std::sort(pred.labels.begin(), pred.labels.end());
  return pred;
}

Value crf_emissions(Tape& tape, CrfParams& params, Value slot_matrix) {
  return tape.matmul(tape.leaf(params.emission_proj), slot_matrix);
}

BioConstraints BioConstraints::from_tags(
    const std::vector<std::string>& tag_names) {
  BioConstraints c;
  c.tag_count = static_cast<int>(tag_names.size());
  c.forbidden.assign(static_cast<size_t>(c.tag_count) * c.tag_count, 0);
  c.forbidden_first.assign(static_cast<size_t>(c.tag_count), 0);
  for (int to = 0; to < c.tag_count; ++to) {
    const std::string& tag = tag_names[static_cast<size_t>(to)];
    if (tag.rfind("I-", 0) != 0) continue;
    const std::string label = tag.substr(2);
    c.forbidden_first[static_cast<size_t>(to)] = 1;
    for (int from = 0; from < c.tag_count; ++from) {
      const std::string& prev = tag_names[static_cast<size_t>(from)];
      const bool continues = prev == "B-" + label || prev == "I-" + label;
      if (!continues) {
        c.forbidden[static_cast<size_t>(from) * c.tag_count + to] = 1;
      }
    }
  }
  return c;
}

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<int> crf_viterbi(const Matrix& emissions, const Matrix& transitions,
                             const BioConstraints* constraints) {
  const int k = emissions.rows;
  const int n = emissions.cols;
  if (transitions.rows != k + 2 || transitions.cols != k + 2) {
    throw_shape_error("crf_viterbi", emissions, transitions);
  }
  if (n < 1) throw std::invalid_argument("crf_viterbi: empty sequence");
  if (constraints && constraints->tag_count != k) {
    throw std::invalid_argument("crf_viterbi: constraints built for " +
                                std::to_string(constraints->tag_count) +
                                " tags, emissions have " + std::to_string(k));
  }
  const int start = k, end = k + 1;

  std::vector<double> score(static_cast<size_t>(k));
  std::vector<double> next(static_cast<size_t>(k));
  std::vector<int> backptr(static_cast<size_t>(k) * n, 0);

  for (int j = 0; j < k; ++j) {
    score[static_cast<size_t>(j)] = transitions.at(start, j) + emissions.at(j, 0);
    if (constraints && constraints->forbidden_first[static_cast<size_t>(j)]) {
      score[static_cast<size_t>(j)] = kNegInf;
    }
  }
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      double best = kNegInf;
      int best_i = 0;
      for (int i = 0; i < k; ++i) {
        if (constraints &&
            constraints->forbidden[static_cast<size_t>(i) * k + j]) {
          continue;
        }
        const double cand = score[static_cast<size_t>(i)] + transitions.at(i, j);
        if (cand > best) {
          best = cand;
          best_i = i;
        }
      }
      next[static_cast<size_t>(j)] = best + emissions.at(j, t);
      backptr[static_cast<size_t>(t) * k + j] = best_i;
    }
    std::swap(score, next);
  }

  double best = kNegInf;
  int best_j = 0;
  for (int j = 0; j < k; ++j) {
    const double cand = score[static_cast<size_t>(j)] + transitions.at(j, end);
    if (cand > best) {
      best = cand;
      best_j = j;
    }
  }

  std::vector<int> path(static_cast<size_t>(n));
  path[static_cast<size_t>(n - 1)] = best_j;
  for (int t = n - 1; t > 0; --t) {
    path[static_cast<size_t>(t - 1)] =
        backptr[static_cast<size_t>(t) * k + path[static_cast<size_t>(t)]];
  }
  return path;
}

double crf_path_score(const Matrix& emissions, const Matrix& transitions,
                      const std::vector<int>& path) {
  const int k = emissions.rows;
  const int n = emissions.cols;
  if (static_cast<int>(path.size()) != n) {
    throw std::invalid_argument("crf_path_score: path length " +
                                std::to_string(path.size()) +
                                " does not match emissions " +
                                emissions.shape_str());
  }
  double s = transitions.at(k, path[0]) + emissions.at(path[0], 0);
  for (int t = 1; t < n; ++t) {
    s += transitions.at(path[static_cast<size_t>(t - 1)],
                        path[static_cast<size_t>(t)]) +
         emissions.at(path[static_cast<size_t>(t)], t);
  }
  s += transitions.at(path[static_cast<size_t>(n - 1)], k + 1);
  return s;
}

}  // namespace misca
