#include <doctest.h>

#include <random>

#include "misca/encoders.hpp"
#include "testutil.hpp"

using namespace misca;

namespace {

TokenIds two_token_ids() {
  TokenIds ids;
  ids.word_ids = {2, 3};
  ids.char_ids = {{2, 3, 4}, {3, 2}};
  return ids;
}

SharedEncoderParams tiny_shared(std::mt19937_64& rng) {
  SharedEncoderParams p;
  p.word_emb = make_param("word_emb", 5, 4, rng);
  p.char_emb = make_param("char_emb", 6, 3, rng);
  p.word_lstm = make_bilstm("word_lstm", 4, 3, rng);
  p.char_lstm = make_bilstm("char_lstm", 3, 2, rng);
  p.attn = {make_param("wq", 3, 4, rng), make_param("wk", 3, 4, rng),
            make_param("wv", 4, 4, rng)};
  return p;
}

}  // namespace

TEST_CASE("lstm_run matches the reference recurrence") {
  std::mt19937_64 rng(21);
  LstmCellParams cell = make_lstm_cell("cell", 3, 4, rng);
  Matrix seq = Matrix::uniform(3, 5, rng, -1.0, 1.0);

  Tape tape;
  Value out = lstm_run(tape, cell, tape.input(seq), false);
  Matrix expected = testutil::reference_lstm(cell.w_in.value, cell.w_rec.value,
                                             cell.bias.value, seq);
  CHECK(misca::max_abs_diff(tape.val(out), expected) <= 1e-12);
}

TEST_CASE("reversed-direction run equals reference on the reversed sequence") {
  std::mt19937_64 rng(22);
  LstmCellParams cell = make_lstm_cell("cell", 2, 3, rng);
  Matrix seq = Matrix::uniform(2, 4, rng, -1.0, 1.0);

  Tape tape;
  Value rev = lstm_run(tape, cell, tape.input(seq), true);
  Matrix expected = testutil::reverse_cols(testutil::reference_lstm(
      cell.w_in.value, cell.w_rec.value, cell.bias.value,
      testutil::reverse_cols(seq)));
  CHECK(misca::max_abs_diff(tape.val(rev), expected) <= 1e-12);
}

TEST_CASE("bilstm stacks forward states over backward states") {
  std::mt19937_64 rng(23);
  BiLstmParams params = make_bilstm("bi", 3, 2, rng);
  Matrix seq = Matrix::uniform(3, 4, rng, -1.0, 1.0);

  Tape tape;
  Value in = tape.input(seq);
  Value both = bilstm_run(tape, params, in);
  Value fwd = lstm_run(tape, params.fwd, in, false);
  Value bwd = lstm_run(tape, params.bwd, in, true);
  CHECK(tape.val(both).rows == 4);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 2; ++i) {
      CHECK(tape.val(both).at(i, j) == tape.val(fwd).at(i, j));
      CHECK(tape.val(both).at(i + 2, j) == tape.val(bwd).at(i, j));
    }
  }
}

TEST_CASE("single-token self-attention is the value projection") {
  std::mt19937_64 rng(24);
  SelfAttentionParams attn{make_param("wq", 2, 3, rng),
                           make_param("wk", 2, 3, rng),
                           make_param("wv", 4, 3, rng)};
  Matrix seq = Matrix::uniform(3, 1, rng, -1.0, 1.0);

  Tape tape;
  Value in = tape.input(seq);
  SelfAttentionOut out = self_attention(tape, attn, in);
  CHECK(tape.val(out.weights).at(0, 0) == 1.0);
  Matrix value_proj = testutil::naive_matmul(attn.w_value.value, seq);
  CHECK(misca::max_abs_diff(tape.val(out.output), value_proj) <= 1e-12);
}

TEST_CASE("masked positions receive zero attention from real tokens") {
  std::mt19937_64 rng(25);
  SelfAttentionParams attn{make_param("wq", 2, 3, rng),
                           make_param("wk", 2, 3, rng),
                           make_param("wv", 4, 3, rng)};
  Matrix seq = Matrix::uniform(3, 4, rng, -1.0, 1.0);
  Matrix mask(1, 4);
  mask.at(0, 0) = 1;
  mask.at(0, 1) = 1;
  mask.at(0, 2) = 1;  // position 3 is padding

  Tape tape;
  SelfAttentionOut out = self_attention(tape, attn, tape.input(seq), &mask);
  for (int i = 0; i < 3; ++i) {
    CHECK(tape.val(out.weights).at(i, 3) == 0.0);
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += tape.val(out.weights).at(i, j);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("encode_shared concatenates the three sub-encoders") {
  std::mt19937_64 rng(26);
  SharedEncoderParams p = tiny_shared(rng);
  TokenIds ids = two_token_ids();

  Tape tape;
  Value encoded = encode_shared(tape, p, ids);
  CHECK(encoded.rows == 2 * 3 + 4 + 2 * 2);
  CHECK(encoded.cols == 2);

  // Run each sub-encoder standalone and compare blocks.
  Tape probe;
  Value words = probe.transpose(probe.embed(p.word_emb, ids.word_ids));
  Value contextual = bilstm_run(probe, p.word_lstm, words);
  Value attended = self_attention(probe, p.attn, words).output;
  Value c0 = char_word_vector(probe, p, ids.char_ids[0]);
  Value c1 = char_word_vector(probe, p, ids.char_ids[1]);

  const Matrix& e = tape.val(encoded);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 6; ++i) {
      CHECK(e.at(i, j) == probe.val(contextual).at(i, j));
    }
    for (int i = 0; i < 4; ++i) {
      CHECK(e.at(6 + i, j) == probe.val(attended).at(i, j));
    }
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(e.at(10 + i, 0) == probe.val(c0).at(i, 0));
    CHECK(e.at(10 + i, 1) == probe.val(c1).at(i, 0));
  }
}

TEST_CASE("zero parameters give all-zero task features") {
  std::mt19937_64 rng(27);
  TaskEncoderParams task = {make_bilstm("i", 4, 3, rng),
                            make_bilstm("s", 4, 3, rng)};
  for (Parameter* p :
       {&task.intent_lstm.fwd.w_in, &task.intent_lstm.fwd.w_rec,
        &task.intent_lstm.fwd.bias, &task.intent_lstm.bwd.w_in,
        &task.intent_lstm.bwd.w_rec, &task.intent_lstm.bwd.bias,
        &task.slot_lstm.fwd.w_in, &task.slot_lstm.fwd.w_rec,
        &task.slot_lstm.fwd.bias, &task.slot_lstm.bwd.w_in,
        &task.slot_lstm.bwd.w_rec, &task.slot_lstm.bwd.bias}) {
    p->value.set_zero();
  }
  Tape tape;
  TaskFeatures f =
      encode_task_specific(tape, task, tape.input(Matrix::zeros(4, 3)));
  for (double v : tape.val(f.intent).data) CHECK(v == 0.0);
  for (double v : tape.val(f.slot).data) CHECK(v == 0.0);
}

TEST_CASE("task encoders are parameter disjoint") {
  std::mt19937_64 rng(28);
  TaskEncoderParams task = {make_bilstm("i", 3, 2, rng),
                            make_bilstm("s", 3, 2, rng)};
  Matrix seq = Matrix::uniform(3, 4, rng, -1.0, 1.0);

  Tape before;
  Matrix slot_before =
      before.val(encode_task_specific(before, task, before.input(seq)).slot);

  task.intent_lstm.fwd.w_in.value.at(0, 0) += 0.5;  // perturb intent side only
  Tape after;
  TaskFeatures f = encode_task_specific(after, task, after.input(seq));
  CHECK(after.val(f.slot) == slot_before);

  // Gradients from an intent-only loss never reach the slot BiLSTM.
  Tape tape;
  TaskFeatures g = encode_task_specific(tape, task, tape.input(seq));
  for (Parameter* p : {&task.slot_lstm.fwd.w_in, &task.slot_lstm.bwd.w_rec}) {
    p->reset_grad();
  }
  tape.backward(tape.sum_all(g.intent));
  for (double v : task.slot_lstm.fwd.w_in.grad.data) CHECK(v == 0.0);
  for (double v : task.slot_lstm.bwd.w_rec.grad.data) CHECK(v == 0.0);
}

TEST_CASE("char word vector concatenates final states of both directions") {
  std::mt19937_64 rng(29);
  SharedEncoderParams p = tiny_shared(rng);
  const std::vector<int> chars = {2, 4, 5};

  Tape tape;
  Value vec = char_word_vector(tape, p, chars);
  CHECK(vec.rows == 4);
  CHECK(vec.cols == 1);

  Matrix emb(3, static_cast<int>(chars.size()));
  for (size_t t = 0; t < chars.size(); ++t) {
    for (int r = 0; r < 3; ++r) {
      emb.at(r, static_cast<int>(t)) = p.char_emb.value.at(chars[t], r);
    }
  }
  Matrix fwd = testutil::reference_lstm(p.char_lstm.fwd.w_in.value,
                                        p.char_lstm.fwd.w_rec.value,
                                        p.char_lstm.fwd.bias.value, emb);
  Matrix bwd = testutil::reverse_cols(testutil::reference_lstm(
      p.char_lstm.bwd.w_in.value, p.char_lstm.bwd.w_rec.value,
      p.char_lstm.bwd.bias.value, testutil::reverse_cols(emb)));
  for (int i = 0; i < 2; ++i) {
    CHECK(tape.val(vec).at(i, 0) ==
          doctest::Approx(fwd.at(i, 2)).epsilon(1e-12));
    CHECK(tape.val(vec).at(2 + i, 0) ==
          doctest::Approx(bwd.at(i, 0)).epsilon(1e-12));
  }
}
