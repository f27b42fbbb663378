#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "misca/tape.hpp"

namespace misca {

// Multi-label intent head plus the intent-count auxiliary classifier.
struct IntentHeadParams {
  Parameter label_weights;  // head_width x |L^I|, column j scores label j
  Parameter count_weights;  // z x |L^I|
  Parameter count_feature;  // d_e x 1
};

struct IntentScores {
  Value logits;        // |L^I| x 1
  Value count_logits;  // z x 1
};

// logits_j = w_j . column_j(label_matrix); count logits from the
// label-attention representations V^I.
IntentScores intent_scores(Tape& tape, IntentHeadParams& params,
                           Value label_matrix, Value v_intent);

struct IntentPrediction {
  std::vector<double> probs;  // sigmoid of the label logits
  int count = 1;              // predicted number of intents, in [1, z]
  std::vector<int> labels;    // `count` label indices, ascending
};

// Selects the top-count labels by probability. Ties everywhere break
// toward the lower index.
IntentPrediction predict_intents(const Matrix& probs,
                                 const Matrix& count_logits);

// Linear-chain CRF over BIO tags. K interior states plus virtual start
// (row K) and end (column K+1) states in the transition matrix.
struct CrfParams {
  Parameter emission_proj;  // K x slot_width
  Parameter transitions;    // (K+2) x (K+2)
};

Value crf_emissions(Tape& tape, CrfParams& params, Value slot_matrix);

// Decode-time BIO transition constraints: I-x may only follow B-x or I-x.
struct BioConstraints {
  int tag_count = 0;
  std::vector<std::uint8_t> forbidden;        // tag_count^2, [from][to]
  std::vector<std::uint8_t> forbidden_first;  // tag_count

  static BioConstraints from_tags(const std::vector<std::string>& tag_names);
};

// Max-scoring tag sequence; ties break toward the lower tag index. When
// `constraints` is given, forbidden transitions score -inf at decode time.
std::vector<int> crf_viterbi(const Matrix& emissions, const Matrix& transitions,
                             const BioConstraints* constraints = nullptr);

// Score of one explicit path under emissions + transitions (including the
// virtual start/end transitions).
double crf_path_score(const Matrix& emissions, const Matrix& transitions,
                      const std::vector<int>& path);

}  // namespace misca
