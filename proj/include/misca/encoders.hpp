#pragma once

#include <random>
#include <vector>

#include "misca/corpus.hpp"
#include "misca/tape.hpp"

namespace misca {

// Standard 4-gate LSTM cell. Gate rows in w_in/w_rec/bias are stacked as
// [input, forget, cell, output]; initial states are zero.
struct LstmCellParams {
  Parameter w_in;   // 4h x in_dim
  Parameter w_rec;  // 4h x h
  Parameter bias;   // 4h x 1

  int hidden() const { return w_rec.value.cols; }
};

struct BiLstmParams {
  LstmCellParams fwd;
  LstmCellParams bwd;
};

// in_dim x n column-per-token sequence -> h x n hidden states. With
// reverse=true the recurrence runs right-to-left but output columns stay in
// token order.
Value lstm_run(Tape& tape, LstmCellParams& cell, Value seq, bool reverse);

// Concatenated forward and backward states, 2h x n.
Value bilstm_run(Tape& tape, BiLstmParams& params, Value seq);

// Single-head scaled dot-product attention over the token axis.
struct SelfAttentionParams {
  Parameter w_query;  // qk_dim x in_dim
  Parameter w_key;    // qk_dim x in_dim
  Parameter w_value;  // out_dim x in_dim
};

struct SelfAttentionOut {
  Value weights;  // n x n, rows sum to 1 over unmasked columns
  Value output;   // out_dim x n
};

SelfAttentionOut self_attention(Tape& tape, SelfAttentionParams& params,
                                Value seq, const Matrix* mask = nullptr);

// Word ids and per-word character ids for one utterance.
struct TokenIds {
  std::vector<int> word_ids;
  std::vector<std::vector<int>> char_ids;

  int length() const { return static_cast<int>(word_ids.size()); }
};

TokenIds ids_for_sample(const Sample& s, const Vocab& vocab);
// Row of a padded batch, trimmed to its real length via the mask.
TokenIds ids_for_batch_row(const Batch& batch, int row);

struct SharedEncoderParams {
  Parameter word_emb;  // |V_word| x word_dim
  Parameter char_emb;  // |V_char| x char_dim
  BiLstmParams word_lstm;
  BiLstmParams char_lstm;
  SelfAttentionParams attn;
};

// Final forward/backward character states of one word, 2h_char x 1.
Value char_word_vector(Tape& tape, SharedEncoderParams& params,
                       const std::vector<int>& char_ids);

// Per-token task-shared vectors: [word BiLSTM ; self-attention ; char
// BiLSTM final states], (2h_word + attn_out + 2h_char) x n.
Value encode_shared(Tape& tape, SharedEncoderParams& params,
                    const TokenIds& ids, const Matrix* mask = nullptr);

struct TaskEncoderParams {
  BiLstmParams intent_lstm;
  BiLstmParams slot_lstm;
};

struct TaskFeatures {
  Value intent;  // E^I, d_e x n
  Value slot;    // E^S, d_e x n
};

// Two parameter-disjoint BiLSTMs over the shared vectors.
TaskFeatures encode_task_specific(Tape& tape, TaskEncoderParams& params,
                                  Value shared);

// Uniform [-0.1, 0.1] initialization helpers; LSTM forget-gate bias rows
// are set to 1 afterwards.
Parameter make_param(const std::string& name, int rows, int cols,
                     std::mt19937_64& rng);
LstmCellParams make_lstm_cell(const std::string& name, int in_dim, int hidden,
                              std::mt19937_64& rng);
BiLstmParams make_bilstm(const std::string& name, int in_dim, int hidden,
                         std::mt19937_64& rng);

}  // namespace misca
