#pragma once

#include <vector>

#include "misca/tape.hpp"

namespace misca {

// Per-token expected BIO tag embedding: S = W softmax_cols(U E^S).
struct SoftSlotParams {
  Parameter tag_scores;  // U: (2|L^{S,fine}|+1) x d_e
  Parameter tag_emb;     // W: d_s x (2|L^{S,fine}|+1)
};

Value soft_slot_embed(Tape& tape, SoftSlotParams& params, Value slot_features);

// The co-attention chain over an ordered list of label-specific matrices
// Q_0 .. Q_{L-1} (intent labels, slot hierarchy levels, soft tag
// embeddings). Every layer is projected into a shared d-dimensional space
// twice (one projection per chain direction) and adjacent layers are
// correlated bilinearly.
struct CoattentionParams {
  std::vector<Parameter> proj_fwd;  // per layer t: d x d_t
  std::vector<Parameter> proj_bwd;  // per layer t: d x d_t
  std::vector<Parameter> bilinear;  // per adjacent pair (t, t+1): d_t x d_{t+1}
};

struct CoattentionStack {
  std::vector<Value> layers;    // Q_t, d_t x m_t
  std::vector<Value> proj_f;    // d x m_t
  std::vector<Value> proj_b;    // d x m_t
  std::vector<Value> corr;      // corr[t]: m_t x m_{t+1}, size layers-1

  int size() const { return static_cast<int>(layers.size()); }
};

// Projects every layer and computes all adjacent bilinear correlations.
// Shape mismatches raise errors naming the offending layer.
CoattentionStack build_chain(Tape& tape, CoattentionParams& params,
                             const std::vector<Value>& layers);

struct CoattentionOut {
  // Both vectors span all layers; h_bwd[L-1] and h_fwd[0] stay invalid
  // (the recursions start from the projected boundary layers instead).
  std::vector<Value> h_bwd;  // valid for t = 0 .. L-2
  std::vector<Value> h_fwd;  // valid for t = 1 .. L-1

  Value intents_out() const { return h_bwd.front(); }  // d x m_0
  Value slots_out() const { return h_fwd.back(); }     // d x m_{L-1}
};

// Backward chain from the last layer down to layer 0 and forward chain from
// layer 0 up to the last layer; the two recursions are independent.
CoattentionOut run_coattention(Tape& tape, const CoattentionStack& stack);

}  // namespace misca
