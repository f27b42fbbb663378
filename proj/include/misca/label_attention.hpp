#pragma once

#include "misca/tape.hpp"

namespace misca {

// Label-specific attention: per-label query rows attend over token
// features and pool them into one representation column per label.
struct LabelAttentionParams {
  Parameter label_queries;  // B: |L| x d_a
  Parameter feature_proj;   // D: d_a x d_e
};

struct LabelAttentionOut {
  Value weights;  // A: |L| x n, each row sums to 1 over unmasked tokens
  Value reprs;    // V: d_e x |L|, column j = representation of label j
};

// A = softmax_rows(B tanh(D E)) with pad columns masked out; V = E A^T.
LabelAttentionOut attend_labels(Tape& tape, LabelAttentionParams& params,
                                Value features, const Matrix* mask = nullptr);

// Coarse-to-fine propagation between adjacent hierarchy levels: per-label
// probabilities from the previous level, projected to a d_p vector that is
// appended to every label column of the next level.
struct HierarchyLinkParams {
  Parameter label_score_vecs;  // rows(V_prev) x |L_prev|, column j = w_j
  Parameter prob_proj;         // Z: d_p x |L_prev|
};

struct HierarchyStep {
  Value scores;  // |L_prev| x 1 pre-sigmoid scores
  Value probs;   // |L_prev| x 1, entries in (0, 1)
  Value suffix;  // d_p x 1
};

HierarchyStep propagate_hierarchy(Tape& tape, HierarchyLinkParams& params,
                                  Value v_prev);

// V_next extended to (rows + d_p) x |L| by stacking the suffix under every
// column.
Value append_hierarchy_suffix(Tape& tape, Value v_next, Value suffix);

}  // namespace misca
