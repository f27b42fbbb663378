#include "misca/label_attention.hpp"

namespace misca {

LabelAttentionOut attend_labels(Tape& tape, LabelAttentionParams& params,
                                Value features, const Matrix* mask) {
  Value projected =
      tape.tanh(tape.matmul(tape.leaf(params.feature_proj), features));
  Value logits = tape.matmul(tape.leaf(params.label_queries), projected);
  Value weights = tape.softmax_rows(logits, mask);
  Value reprs = tape.matmul(features, tape.transpose(weights));
  return {weights, reprs};
}

HierarchyStep propagate_hierarchy(Tape& tape, HierarchyLinkParams& params,
                                  Value v_prev) {
  Value scores = tape.transpose(
      tape.col_sums(tape.mul(tape.leaf(params.label_score_vecs), v_prev)));
  Value probs = tape.sigmoid(scores);
  Value suffix = tape.matmul(tape.leaf(params.prob_proj), probs);
  return {scores, probs, suffix};
}

Value append_hierarchy_suffix(Tape& tape, Value v_next, Value suffix) {
  return tape.concat_rows(v_next, tape.repeat_col(suffix, v_next.cols));
}

}  // namespace misca
