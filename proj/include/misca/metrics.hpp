#pragma once

#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace misca {

// Contiguous BIO span: [begin, end) token positions plus the label.
struct Span {
  int begin = 0;
  int end = 0;
  std::string label;

  auto operator<=>(const Span&) const = default;
};

// Extracts (begin, end, label) spans from a BIO tag sequence. An I-x that
// does not continue an open x span opens a new one (conlleval behavior).
// Invalid tag strings raise.
std::vector<Span> extract_spans(const std::vector<std::string>& tags);

// Fraction of utterances whose predicted intent set equals the gold set.
double intent_accuracy(const std::vector<std::set<std::string>>& pred,
                       const std::vector<std::set<std::string>>& gold);

struct SpanF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold_spans = 0;
  long pred_spans = 0;
  long correct_spans = 0;
};

// Micro-averaged exact-match span F1 over the corpus; empty numerators use
// the P = R = 0 -> F1 = 0 convention.
SpanF1 slot_f1(const std::vector<std::vector<std::string>>& pred,
               const std::vector<std::vector<std::string>>& gold);

// Fraction of utterances with the exact gold intent set and the exact gold
// tag sequence.
double overall_accuracy(const std::vector<std::set<std::string>>& pred_intents,
                        const std::vector<std::set<std::string>>& gold_intents,
                        const std::vector<std::vector<std::string>>& pred_tags,
                        const std::vector<std::vector<std::string>>& gold_tags);

struct LabelF1 {
  std::string label;
  long gold = 0, pred = 0, correct = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct IntentLabelStats {
  std::string label;
  long gold = 0, pred = 0, correct = 0;
};

struct EvalReport {
  double intent_accuracy = 0.0;
  SpanF1 slot;
  double overall_accuracy = 0.0;
  double exact_sequence_accuracy = 0.0;  // full tag sequence correct
  long utterances = 0;
  std::vector<LabelF1> per_slot_label;
  std::vector<IntentLabelStats> per_intent_label;
};

EvalReport evaluate(const std::vector<std::set<std::string>>& pred_intents,
                    const std::vector<std::set<std::string>>& gold_intents,
                    const std::vector<std::vector<std::string>>& pred_tags,
                    const std::vector<std::vector<std::string>>& gold_tags);

std::string report_table(const EvalReport& report);
std::string report_key_values(const EvalReport& report);

}  // namespace misca
