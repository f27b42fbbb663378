#include "misca/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace misca {

namespace {

void check_lengths(size_t a, size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": got " +
                                std::to_string(a) + " predictions for " +
                                std::to_string(b) + " gold entries");
  }
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  Span open;
  bool in_span = false;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[static_cast<size_t>(i)];
    const bool is_b = tag.rfind("B-", 0) == 0;
    const bool is_i = tag.rfind("I-", 0) == 0;
    if (!is_b && !is_i && tag != "O") {
      throw std::invalid_argument("extract_spans: invalid tag '" + tag + "'");
    }
    const bool continues =
        is_i && in_span && open.label == tag.substr(2);
    if (continues) {
      open.end = i + 1;
      continue;
    }
    if (in_span) {
      spans.push_back(open);
      in_span = false;
    }
    if (is_b || is_i) {
      open = Span{i, i + 1, tag.substr(2)};
      in_span = true;
    }
  }
  if (in_span) spans.push_back(open);
  return spans;
}

double intent_accuracy(const std::vector<std::set<std::string>>& pred,
                       const std::vector<std::set<std::string>>& gold) {
  check_lengths(pred.size(), gold.size(), "intent_accuracy");
  if (gold.empty()) return 0.0;
  long correct = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == gold[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

SpanF1 slot_f1(const std::vector<std::vector<std::string>>& pred,
               const std::vector<std::vector<std::string>>& gold) {
  check_lengths(pred.size(), gold.size(), "slot_f1");
  SpanF1 out;
  for (size_t i = 0; i < gold.size(); ++i) {
    check_lengths(pred[i].size(), gold[i].size(), "slot_f1(utterance)");
    auto p = extract_spans(pred[i]);
    auto g = extract_spans(gold[i]);
    out.pred_spans += static_cast<long>(p.size());
    out.gold_spans += static_cast<long>(g.size());
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<Span> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(both));
    out.correct_spans += static_cast<long>(both.size());
  }
  out.precision = safe_div(static_cast<double>(out.correct_spans),
                           static_cast<double>(out.pred_spans));
  out.recall = safe_div(static_cast<double>(out.correct_spans),
                        static_cast<double>(out.gold_spans));
  out.f1 = safe_div(2.0 * out.precision * out.recall,
                    out.precision + out.recall);
  return out;
}

double overall_accuracy(const std::vector<std::set<std::string>>& pred_intents,
                        const std::vector<std::set<std::string>>& gold_intents,
                        const std::vector<std::vector<std::string>>& pred_tags,
                        const std::vector<std::vector<std::string>>& gold_tags) {
  check_lengths(pred_intents.size(), gold_intents.size(), "overall_accuracy");
  check_lengths(pred_tags.size(), gold_tags.size(), "overall_accuracy(tags)");
  check_lengths(pred_intents.size(), pred_tags.size(), "overall_accuracy(mix)");
  if (gold_intents.empty()) return 0.0;
  long correct = 0;
  for (size_t i = 0; i < gold_intents.size(); ++i) {
    if (pred_intents[i] == gold_intents[i] && pred_tags[i] == gold_tags[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) /
         static_cast<double>(gold_intents.size());
}

EvalReport evaluate(const std::vector<std::set<std::string>>& pred_intents,
                    const std::vector<std::set<std::string>>& gold_intents,
                    const std::vector<std::vector<std::string>>& pred_tags,
                    const std::vector<std::vector<std::string>>& gold_tags) {
  EvalReport r;
  r.utterances = static_cast<long>(gold_intents.size());
  r.intent_accuracy = intent_accuracy(pred_intents, gold_intents);
  r.slot = slot_f1(pred_tags, gold_tags);
  r.overall_accuracy =
      overall_accuracy(pred_intents, gold_intents, pred_tags, gold_tags);

  long exact = 0;
  for (size_t i = 0; i < gold_tags.size(); ++i) {
    if (pred_tags[i] == gold_tags[i]) ++exact;
  }
  r.exact_sequence_accuracy =
      gold_tags.empty() ? 0.0
                        : static_cast<double>(exact) /
                              static_cast<double>(gold_tags.size());

  std::map<std::string, LabelF1> by_label;
  for (size_t i = 0; i < gold_tags.size(); ++i) {
    auto p = extract_spans(pred_tags[i]);
    auto g = extract_spans(gold_tags[i]);
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<Span> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(both));
    for (const auto& s : p) by_label[s.label].pred++;
    for (const auto& s : g) by_label[s.label].gold++;
    for (const auto& s : both) by_label[s.label].correct++;
  }
  for (auto& [label, stats] : by_label) {
    stats.label = label;
    stats.precision = safe_div(static_cast<double>(stats.correct),
                               static_cast<double>(stats.pred));
    stats.recall = safe_div(static_cast<double>(stats.correct),
                            static_cast<double>(stats.gold));
    stats.f1 = safe_div(2.0 * stats.precision * stats.recall,
                        stats.precision + stats.recall);
    r.per_slot_label.push_back(stats);
  }

  std::map<std::string, IntentLabelStats> by_intent;
  for (size_t i = 0; i < gold_intents.size(); ++i) {
    for (const auto& l : gold_intents[i]) by_intent[l].gold++;
    for (const auto& l : pred_intents[i]) {
      by_intent[l].pred++;
      if (gold_intents[i].count(l)) by_intent[l].correct++;
    }
  }
  for (auto& [label, stats] : by_intent) {
    stats.label = label;
    r.per_intent_label.push_back(stats);
  }
  return r;
}

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "utterances              " << r.utterances << "\n";
  os << "intent accuracy         " << r.intent_accuracy << "\n";
  os << "slot precision          " << r.slot.precision << "\n";
  os << "slot recall             " << r.slot.recall << "\n";
  os << "slot F1                 " << r.slot.f1 << "\n";
  os << "exact tag sequence      " << r.exact_sequence_accuracy << "\n";
  os << "overall accuracy        " << r.overall_accuracy << "\n";
  if (!r.per_slot_label.empty()) {
    os << "\nper slot label (gold/pred/correct  P  R  F1)\n";
    for (const auto& s : r.per_slot_label) {
      os << "  " << std::left << std::setw(28) << s.label << std::right
         << s.gold << "/" << s.pred << "/" << s.correct << "  "
         << s.precision << " " << s.recall << " " << s.f1 << "\n";
    }
  }
  if (!r.per_intent_label.empty()) {
    os << "\nper intent label (gold/pred/correct)\n";
    for (const auto& s : r.per_intent_label) {
      os << "  " << std::left << std::setw(28) << s.label << std::right
         << s.gold << "/" << s.pred << "/" << s.correct << "\n";
    }
  }
  return os.str();
}

std::string report_key_values(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "utterances " << r.utterances << "\n";
  os << "intent_accuracy " << r.intent_accuracy << "\n";
  os << "slot_precision " << r.slot.precision << "\n";
  os << "slot_recall " << r.slot.recall << "\n";
  os << "slot_f1 " << r.slot.f1 << "\n";
  os << "exact_sequence_accuracy " << r.exact_sequence_accuracy << "\n";
  os << "overall_accuracy " << r.overall_accuracy << "\n";
  for (const auto& s : r.per_slot_label) {
    os << "slot_label." << s.label << ".f1 " << s.f1 << "\n";
  }
  for (const auto& s : r.per_intent_label) {
    os << "intent_label." << s.label << ".correct " << s.correct << "\n";
  }
  return os.str();
}

}  // namespace misca
