#include "misca/model.hpp"

#include <random>
#include <stdexcept>

#include "misca/kernels.hpp"

namespace misca {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull:
      return "full";
    case Ablation::kNoSlotLabelAttention:
      return "no_slot_label_attention";
    case Ablation::kNoCoattention:
      return "no_coattention";
  }
  return "full";
}

Ablation ablation_from_string(const std::string& name) {
  if (name == "full") return Ablation::kFull;
  if (name == "no_slot_label_attention") return Ablation::kNoSlotLabelAttention;
  if (name == "no_coattention") return Ablation::kNoCoattention;
  throw std::invalid_argument("unknown ablation '" + name +
                              "' (expected full, no_slot_label_attention or "
                              "no_coattention)");
}

int MiscaModel::chain_length() const {
  switch (ablation) {
    case Ablation::kFull:
      return index.hierarchy.levels() + 2;
    case Ablation::kNoSlotLabelAttention:
      return 2;
    case Ablation::kNoCoattention:
      return 0;
  }
  return 0;
}

int MiscaModel::head_width() const {
  return ablation == Ablation::kNoCoattention ? dims.d_e()
                                              : dims.d_e() + dims.d;
}

namespace {

void collect_lstm(std::vector<Parameter*>& out, BiLstmParams& p) {
  out.push_back(&p.fwd.w_in);
  out.push_back(&p.fwd.w_rec);
  out.push_back(&p.fwd.bias);
  out.push_back(&p.bwd.w_in);
  out.push_back(&p.bwd.w_rec);
  out.push_back(&p.bwd.bias);
}

}  // namespace

std::vector<Parameter*> MiscaModel::parameters() {
  std::vector<Parameter*> out;
  out.push_back(&shared.word_emb);
  out.push_back(&shared.char_emb);
  collect_lstm(out, shared.word_lstm);
  collect_lstm(out, shared.char_lstm);
  out.push_back(&shared.attn.w_query);
  out.push_back(&shared.attn.w_key);
  out.push_back(&shared.attn.w_value);
  collect_lstm(out, task.intent_lstm);
  collect_lstm(out, task.slot_lstm);
  out.push_back(&intent_attention.label_queries);
  out.push_back(&intent_attention.feature_proj);
  for (auto& level : slot_attention) {
    out.push_back(&level.label_queries);
    out.push_back(&level.feature_proj);
  }
  for (auto& link : hierarchy_links) {
    out.push_back(&link.label_score_vecs);
    out.push_back(&link.prob_proj);
  }
  if (ablation != Ablation::kNoCoattention) {
    out.push_back(&soft_slot.tag_scores);
    out.push_back(&soft_slot.tag_emb);
    for (auto& p : coattention.proj_fwd) out.push_back(&p);
    for (auto& p : coattention.proj_bwd) out.push_back(&p);
    for (auto& p : coattention.bilinear) out.push_back(&p);
  }
  out.push_back(&intent_head.label_weights);
  out.push_back(&intent_head.count_weights);
  out.push_back(&intent_head.count_feature);
  out.push_back(&crf.emission_proj);
  out.push_back(&crf.transitions);
  return out;
}

std::vector<const Parameter*> MiscaModel::parameters() const {
  auto mut = const_cast<MiscaModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

MiscaModel build_model(const CorpusIndex& index, const ModelDims& dims,
                       Ablation ablation, std::uint64_t seed) {
  MiscaModel m;
  m.dims = dims;
  m.ablation = ablation;
  m.index = index;

  const int intents = m.intent_count();
  const int tags = m.tag_count();
  const int d_e = dims.d_e();
  const int levels = index.hierarchy.levels();
  if (intents < 1) {
    throw std::invalid_argument("build_model: empty intent label set");
  }

  // Parameters are drawn in census order from one generator, so a seed
  // pins every initial value.
  std::mt19937_64 rng(seed);

  m.shared.word_emb =
      make_param("encoder.word_emb", index.vocab.word_count(), dims.word_dim, rng);
  m.shared.char_emb =
      make_param("encoder.char_emb", index.vocab.char_count(), dims.char_dim, rng);
  m.shared.word_lstm =
      make_bilstm("encoder.word_lstm", dims.word_dim, dims.word_hidden, rng);
  m.shared.char_lstm =
      make_bilstm("encoder.char_lstm", dims.char_dim, dims.char_hidden, rng);
  m.shared.attn = {
      make_param("encoder.attn.w_query", dims.attn_qk_dim, dims.word_dim, rng),
      make_param("encoder.attn.w_key", dims.attn_qk_dim, dims.word_dim, rng),
      make_param("encoder.attn.w_value", dims.attn_dim, dims.word_dim, rng),
  };
  m.task.intent_lstm = make_bilstm("encoder.intent_lstm", dims.shared_width(),
                                   dims.task_hidden, rng);
  m.task.slot_lstm = make_bilstm("encoder.slot_lstm", dims.shared_width(),
                                 dims.task_hidden, rng);

  m.intent_attention = {
      make_param("label_attention.intent.label_queries", intents, dims.d_a, rng),
      make_param("label_attention.intent.feature_proj", dims.d_a, d_e, rng),
  };

  if (ablation == Ablation::kFull) {
    for (int k = 0; k < levels; ++k) {
      const int labels =
          static_cast<int>(index.hierarchy.slot_levels[static_cast<size_t>(k)].size());
      const std::string base =
          "label_attention.slot" + std::to_string(k + 1) + ".";
      m.slot_attention.push_back(
          {make_param(base + "label_queries", labels, dims.d_a, rng),
           make_param(base + "feature_proj", dims.d_a, d_e, rng)});
    }
    for (int k = 0; k + 1 < levels; ++k) {
      const int labels =
          static_cast<int>(index.hierarchy.slot_levels[static_cast<size_t>(k)].size());
      // Level 1 columns have d_e rows; deeper levels carry the appended
      // d_p suffix.
      const int rows = k == 0 ? d_e : d_e + dims.d_p;
      const std::string base = "hierarchy.link" + std::to_string(k + 1) + ".";
      m.hierarchy_links.push_back(
          {make_param(base + "label_score_vecs", rows, labels, rng),
           make_param(base + "prob_proj", dims.d_p, labels, rng)});
    }
  }

  if (ablation != Ablation::kNoCoattention) {
    m.soft_slot = {
        make_param("coattention.soft.tag_scores", tags, d_e, rng),
        make_param("coattention.soft.tag_emb", dims.d_s, tags, rng),
    };
    // Layer widths d_t along the chain.
    std::vector<int> widths;
    widths.push_back(d_e);  // V^I
    if (ablation == Ablation::kFull) {
      widths.push_back(d_e);  // level 1
      for (int k = 2; k <= levels; ++k) widths.push_back(d_e + dims.d_p);
    }
    widths.push_back(dims.d_s);  // S
    for (size_t t = 0; t < widths.size(); ++t) {
      const std::string base = "coattention.layer" + std::to_string(t + 1);
      m.coattention.proj_fwd.push_back(
          make_param(base + ".proj_fwd", dims.d, widths[t], rng));
      m.coattention.proj_bwd.push_back(
          make_param(base + ".proj_bwd", dims.d, widths[t], rng));
    }
    for (size_t t = 0; t + 1 < widths.size(); ++t) {
      m.coattention.bilinear.push_back(
          make_param("coattention.bilinear" + std::to_string(t + 2),
                     widths[t], widths[t + 1], rng));
    }
  }

  m.intent_head = {
      make_param("intent_head.label_weights", m.head_width(), intents, rng),
      make_param("intent_head.count_weights", index.max_intents, intents, rng),
      make_param("intent_head.count_feature", d_e, 1, rng),
  };
  m.crf.emission_proj =
      make_param("crf.emission_proj", tags, m.head_width(), rng);
  m.crf.transitions =
      Parameter("crf.transitions", Matrix::zeros(tags + 2, tags + 2));
  return m;
}

std::vector<CensusEntry> parameter_census(const MiscaModel& model) {
  std::vector<CensusEntry> out;
  for (const Parameter* p : model.parameters()) {
    out.push_back({p->name, p->value.rows, p->value.cols});
  }
  return out;
}

long total_parameter_count(const MiscaModel& model) {
  long total = 0;
  for (const Parameter* p : model.parameters()) {
    total += static_cast<long>(p->value.size());
  }
  return total;
}

UtteranceForward forward_utterance(Tape& tape, MiscaModel& model,
                                   const TokenIds& ids) {
  UtteranceForward fwd;
  fwd.n = ids.length();

  fwd.shared_vecs = encode_shared(tape, model.shared, ids);
  TaskFeatures feats = encode_task_specific(tape, model.task, fwd.shared_vecs);
  fwd.intent_feats = feats.intent;
  fwd.slot_feats = feats.slot;

  LabelAttentionOut intent_attn =
      attend_labels(tape, model.intent_attention, fwd.intent_feats);
  fwd.intent_label_weights = intent_attn.weights;
  fwd.v_intent = intent_attn.reprs;

  if (model.ablation == Ablation::kNoCoattention) {
    fwd.h_intent = fwd.v_intent;
    fwd.h_slot = fwd.slot_feats;
  } else {
    std::vector<Value> layers;
    layers.push_back(fwd.v_intent);
    if (model.ablation == Ablation::kFull) {
      const int levels = model.index.hierarchy.levels();
      for (int k = 0; k < levels; ++k) {
        Value v = attend_labels(tape,
                                model.slot_attention[static_cast<size_t>(k)],
                                fwd.slot_feats)
                      .reprs;
        if (k >= 1) {
          HierarchyStep step = propagate_hierarchy(
              tape, model.hierarchy_links[static_cast<size_t>(k - 1)],
              fwd.v_slot[static_cast<size_t>(k - 1)]);
          fwd.hierarchy_logits.push_back(step.scores);
          fwd.hierarchy_probs.push_back(step.probs);
          v = append_hierarchy_suffix(tape, v, step.suffix);
        }
        fwd.v_slot.push_back(v);
        layers.push_back(v);
      }
    }
    fwd.soft_slots = soft_slot_embed(tape, model.soft_slot, fwd.slot_feats);
    layers.push_back(fwd.soft_slots);

    fwd.stack = build_chain(tape, model.coattention, layers);
    fwd.chains = run_coattention(tape, fwd.stack);
    fwd.h_intent = tape.concat_rows(fwd.v_intent, fwd.chains.intents_out());
    fwd.h_slot = tape.concat_rows(fwd.slot_feats, fwd.chains.slots_out());
  }

  IntentScores scores =
      intent_scores(tape, model.intent_head, fwd.h_intent, fwd.v_intent);
  fwd.intent_logits = scores.logits;
  fwd.count_logits = scores.count_logits;
  fwd.emissions = crf_emissions(tape, model.crf, fwd.h_slot);
  return fwd;
}

DecodedPrediction decode_utterance(const MiscaModel& model,
                                   const UtteranceForward& fwd, Tape& tape,
                                   bool hard_bio) {
  DecodedPrediction out;
  Matrix probs;
  kernels::sigmoid_forward(tape.val(fwd.intent_logits), probs);
  out.raw_intents = predict_intents(probs, tape.val(fwd.count_logits));
  for (int id : out.raw_intents.labels) {
    out.intents.push_back(
        model.index.hierarchy.intent_labels[static_cast<size_t>(id)]);
  }

  BioConstraints constraints;
  if (hard_bio) {
    constraints = BioConstraints::from_tags(model.index.hierarchy.tag_names());
  }
  const std::vector<int> path =
      crf_viterbi(tape.val(fwd.emissions), model.crf.transitions.value,
                  hard_bio ? &constraints : nullptr);
  for (int tag : path) {
    out.tags.push_back(
        model.index.hierarchy.tag_names()[static_cast<size_t>(tag)]);
  }
  return out;
}

}  // namespace misca
