#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "misca/coattention.hpp"
#include "misca/corpus.hpp"
#include "misca/decoders.hpp"
#include "misca/encoders.hpp"
#include "misca/label_attention.hpp"
#include "misca/tape.hpp"

namespace misca {

// Width hyperparameters. Defaults follow the MixATIS-style configuration;
// the task-specific feature width d_e is always 2 * task_hidden.
struct ModelDims {
  int word_dim = 64;
  int word_hidden = 64;
  int attn_dim = 256;    // self-attention output width
  int attn_qk_dim = 64;  // query/key width
  int char_dim = 32;
  int char_hidden = 32;
  int task_hidden = 128;
  int d_a = 256;  // label-attention projection width
  int d_p = 32;   // hierarchy probability projection width
  int d_s = 128;  // soft slot-tag embedding width
  int d = 128;    // co-attention shared projection width

  int d_e() const { return 2 * task_hidden; }
  int shared_width() const {
    return 2 * word_hidden + attn_dim + 2 * char_hidden;
  }
};

enum class Ablation { kFull, kNoSlotLabelAttention, kNoCoattention };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& name);

struct MiscaModel {
  ModelDims dims;
  Ablation ablation = Ablation::kFull;
  CorpusIndex index;

  SharedEncoderParams shared;
  TaskEncoderParams task;
  LabelAttentionParams intent_attention;
  std::vector<LabelAttentionParams> slot_attention;  // full only, per level
  std::vector<HierarchyLinkParams> hierarchy_links;  // full only, levels-1
  SoftSlotParams soft_slot;                          // absent w/o co-attention
  CoattentionParams coattention;                     // absent w/o co-attention
  IntentHeadParams intent_head;
  CrfParams crf;

  int intent_count() const {
    return static_cast<int>(index.hierarchy.intent_labels.size());
  }
  int tag_count() const { return index.hierarchy.bio_tag_count(); }
  int max_intents() const { return index.max_intents; }
  // Chain layers: levels + 2 for the full model, 2 without slot label
  // attention, 0 without co-attention.
  int chain_length() const;
  // Width of the intent head / CRF emission inputs (d_e + d, or d_e
  // without co-attention).
  int head_width() const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

MiscaModel build_model(const CorpusIndex& index, const ModelDims& dims,
                       Ablation ablation, std::uint64_t seed);

struct CensusEntry {
  std::string name;
  int rows = 0;
  int cols = 0;
  long count() const { return static_cast<long>(rows) * cols; }
};

std::vector<CensusEntry> parameter_census(const MiscaModel& model);
long total_parameter_count(const MiscaModel& model);

// Everything one forward pass produces, with intermediates kept for tests
// and the inspection dump.
struct UtteranceForward {
  int n = 0;
  Value shared_vecs;   // e, shared_width x n
  Value intent_feats;  // E^I, d_e x n
  Value slot_feats;    // E^S, d_e x n
  Value intent_label_weights;          // A^I
  Value v_intent;                      // V^I, d_e x |L^I|
  std::vector<Value> v_slot;           // per level (full only)
  std::vector<Value> hierarchy_probs;  // per link (full, levels >= 2)
  std::vector<Value> hierarchy_logits;
  Value soft_slots;  // S, d_s x n
  CoattentionStack stack;
  CoattentionOut chains;
  Value h_intent;  // decoder input H^I (or V^I)
  Value h_slot;    // decoder input H^S (or E^S)
  Value intent_logits;  // |L^I| x 1
  Value count_logits;   // z x 1
  Value emissions;      // K x n
};

UtteranceForward forward_utterance(Tape& tape, MiscaModel& model,
                                   const TokenIds& ids);

// Value-level decode of one utterance: intent set + BIO tags as strings.
struct DecodedPrediction {
  std::vector<std::string> intents;  // sorted
  std::vector<std::string> tags;
  IntentPrediction raw_intents;
};

DecodedPrediction decode_utterance(const MiscaModel& model,
                                   const UtteranceForward& fwd, Tape& tape,
                                   bool hard_bio);

}  // namespace misca
