#include "misca/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace misca {

Value lstm_run(Tape& tape, LstmCellParams& cell, Value seq, bool reverse) {
  const int h = cell.hidden();
  const int n = seq.cols;
  if (n < 1) throw std::invalid_argument("lstm_run: empty sequence");

  Value w_in = tape.leaf(cell.w_in);
  Value w_rec = tape.leaf(cell.w_rec);
  Value bias = tape.leaf(cell.bias);
  Value state_h = tape.input(Matrix::zeros(h, 1));
  Value state_c = tape.input(Matrix::zeros(h, 1));

  std::vector<Value> outputs(static_cast<size_t>(n));
  for (int step = 0; step < n; ++step) {
    const int pos = reverse ? n - 1 - step : step;
    Value x = tape.slice_cols(seq, pos, 1);
    Value pre = tape.add(
        tape.add(tape.matmul(w_in, x), tape.matmul(w_rec, state_h)), bias);
    Value gate_in = tape.sigmoid(tape.slice_rows(pre, 0, h));
    Value gate_forget = tape.sigmoid(tape.slice_rows(pre, h, h));
    Value cell_update = tape.tanh(tape.slice_rows(pre, 2 * h, h));
    Value gate_out = tape.sigmoid(tape.slice_rows(pre, 3 * h, h));
    state_c = tape.add(tape.mul(gate_forget, state_c),
                       tape.mul(gate_in, cell_update));
    state_h = tape.mul(gate_out, tape.tanh(state_c));
    outputs[static_cast<size_t>(pos)] = state_h;
  }
  return tape.concat_cols(outputs);
}

Value bilstm_run(Tape& tape, BiLstmParams& params, Value seq) {
  Value fwd = lstm_run(tape, params.fwd, seq, false);
  Value bwd = lstm_run(tape, params.bwd, seq, true);
  return tape.concat_rows(fwd, bwd);
}

SelfAttentionOut self_attention(Tape& tape, SelfAttentionParams& params,
                                Value seq, const Matrix* mask) {
  Value queries = tape.matmul(tape.leaf(params.w_query), seq);
  Value keys = tape.matmul(tape.leaf(params.w_key), seq);
  Value values = tape.matmul(tape.leaf(params.w_value), seq);
  const double inv_sqrt_d = 1.0 / std::sqrt(params.w_query.value.rows);
  Value scores =
      tape.scale(tape.matmul(tape.transpose(queries), keys), inv_sqrt_d);
  Value weights = tape.softmax_rows(scores, mask);
  Value output = tape.matmul(values, tape.transpose(weights));
  return {weights, output};
}

TokenIds ids_for_sample(const Sample& s, const Vocab& vocab) {
  TokenIds ids;
  for (const auto& tok : s.tokens) {
    ids.word_ids.push_back(vocab.word_id(tok));
    std::vector<int> cs;
    cs.reserve(tok.size());
    for (char c : tok) cs.push_back(vocab.char_id(c));
    ids.char_ids.push_back(std::move(cs));
  }
  return ids;
}

TokenIds ids_for_batch_row(const Batch& batch, int row) {
  TokenIds ids;
  const int n = batch.length_of(row);
  for (int t = 0; t < n; ++t) {
    const size_t pos = static_cast<size_t>(row) * batch.max_len + t;
    ids.word_ids.push_back(batch.token_ids[pos]);
    std::vector<int> cs;
    for (int c = 0; c < batch.max_word_len; ++c) {
      const int id = batch.char_ids[pos * batch.max_word_len + c];
      if (id == Vocab::kPadId) break;  // char padding is trailing
      cs.push_back(id);
    }
    if (cs.empty()) cs.push_back(Vocab::kUnkId);
    ids.char_ids.push_back(std::move(cs));
  }
  return ids;
}

Value char_word_vector(Tape& tape, SharedEncoderParams& params,
                       const std::vector<int>& char_ids) {
  const int h = params.char_lstm.fwd.hidden();
  Value chars = tape.transpose(tape.embed(params.char_emb, char_ids));
  Value states = bilstm_run(tape, params.char_lstm, chars);
  const int last = static_cast<int>(char_ids.size()) - 1;
  Value fwd_final = tape.slice_rows(tape.slice_cols(states, last, 1), 0, h);
  Value bwd_final = tape.slice_rows(tape.slice_cols(states, 0, 1), h, h);
  return tape.concat_rows(fwd_final, bwd_final);
}

Value encode_shared(Tape& tape, SharedEncoderParams& params,
                    const TokenIds& ids, const Matrix* mask) {
  const int n = ids.length();
  if (n < 1) throw std::invalid_argument("encode_shared: empty utterance");
  if (ids.char_ids.size() != ids.word_ids.size()) {
    throw std::invalid_argument(
        "encode_shared: word/char id lists differ in length");
  }

  Value words = tape.transpose(tape.embed(params.word_emb, ids.word_ids));
  Value contextual = bilstm_run(tape, params.word_lstm, words);
  Value attended = self_attention(tape, params.attn, words, mask).output;

  std::vector<Value> char_vecs;
  char_vecs.reserve(static_cast<size_t>(n));
  for (const auto& cs : ids.char_ids) {
    char_vecs.push_back(char_word_vector(tape, params, cs));
  }
  Value char_seq = tape.concat_cols(char_vecs);

  return tape.concat_rows(contextual, tape.concat_rows(attended, char_seq));
}

TaskFeatures encode_task_specific(Tape& tape, TaskEncoderParams& params,
                                  Value shared) {
  return {bilstm_run(tape, params.intent_lstm, shared),
          bilstm_run(tape, params.slot_lstm, shared)};
}

Parameter make_param(const std::string& name, int rows, int cols,
                     std::mt19937_64& rng) {
  return Parameter(name, Matrix::uniform(rows, cols, rng));
}

LstmCellParams make_lstm_cell(const std::string& name, int in_dim, int hidden,
                              std::mt19937_64& rng) {
  LstmCellParams cell{
      make_param(name + ".w_in", 4 * hidden, in_dim, rng),
      make_param(name + ".w_rec", 4 * hidden, hidden, rng),
      make_param(name + ".bias", 4 * hidden, 1, rng),
  };
  for (int i = hidden; i < 2 * hidden; ++i) cell.bias.value.at(i, 0) = 1.0;
  return cell;
}

BiLstmParams make_bilstm(const std::string& name, int in_dim, int hidden,
                         std::mt19937_64& rng) {
  return {make_lstm_cell(name + ".fwd", in_dim, hidden, rng),
          make_lstm_cell(name + ".bwd", in_dim, hidden, rng)};
}

}  // namespace misca
