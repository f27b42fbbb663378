#include <doctest.h>

#include <algorithm>
#include <random>

#include "misca/metrics.hpp"
#include "testutil.hpp"

using namespace misca;

namespace {

// Random BIO tag sequence over `label_count` labels, possibly with dangling
// I- tags (predictions are allowed to be sloppy).
std::vector<std::string> random_tags(int len, int label_count,
                                     std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> which(0, label_count - 1);
  std::vector<std::string> tags;
  for (int i = 0; i < len; ++i) {
    const int k = kind(rng);
    const std::string label(1, static_cast<char>('a' + which(rng)));
    if (k == 0) {
      tags.push_back("O");
    } else if (k == 1) {
      tags.push_back("B-" + label);
    } else {
      tags.push_back("I-" + label);
    }
  }
  return tags;
}

std::set<std::string> random_intents(int pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_int_distribution<int> which(0, pool - 1);
  std::set<std::string> out;
  const int n = count(rng);
  while (static_cast<int>(out.size()) < n) {
    out.insert("intent" + std::to_string(which(rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("intent accuracy uses set equality") {
  std::vector<std::set<std::string>> gold = {{"A", "B"}, {"A", "B"}};
  std::vector<std::set<std::string>> pred = {{"B", "A"}, {"A"}};
  CHECK(intent_accuracy(pred, gold) == 0.5);
  CHECK_THROWS_AS(intent_accuracy({}, gold), std::invalid_argument);
}

TEST_CASE("span extraction handles openings, continuations and restarts") {
  CHECK(extract_spans({"O", "B-a", "I-a", "O", "B-b"}) ==
        std::vector<Span>{{1, 3, "a"}, {4, 5, "b"}});
  // I- after a different label or O opens a new span (conlleval behavior).
  CHECK(extract_spans({"I-a", "I-b", "I-b"}) ==
        std::vector<Span>{{0, 1, "a"}, {1, 3, "b"}});
  // B- always opens a fresh span.
  CHECK(extract_spans({"B-a", "B-a"}) ==
        std::vector<Span>{{0, 1, "a"}, {1, 2, "a"}});
  CHECK_THROWS_AS(extract_spans({"Q-a"}), std::invalid_argument);
}

TEST_CASE("identical sequences score perfect slot F1") {
  std::vector<std::vector<std::string>> tags = {
      {"O", "B-a", "I-a"}, {"B-b", "O", "O"}};
  SpanF1 f1 = slot_f1(tags, tags);
  CHECK(f1.precision == 1.0);
  CHECK(f1.recall == 1.0);
  CHECK(f1.f1 == 1.0);
}

TEST_CASE("empty predictions follow the zero convention") {
  std::vector<std::vector<std::string>> gold = {{"B-a", "O"}};
  std::vector<std::vector<std::string>> pred = {{"O", "O"}};
  SpanF1 f1 = slot_f1(pred, gold);
  CHECK(f1.precision == 0.0);
  CHECK(f1.recall == 0.0);
  CHECK(f1.f1 == 0.0);
}

TEST_CASE("slot F1 agrees with an independent span extractor on 50 pairs") {
  std::mt19937_64 rng(71);
  std::vector<std::vector<std::string>> pred, gold;
  for (int i = 0; i < 50; ++i) {
    std::uniform_int_distribution<int> len(1, 10);
    const int n = len(rng);
    pred.push_back(random_tags(n, 3, rng));
    gold.push_back(random_tags(n, 3, rng));
  }
  SpanF1 got = slot_f1(pred, gold);

  long gold_count = 0, pred_count = 0, correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    auto p = testutil::spans_oracle(pred[i]);
    auto g = testutil::spans_oracle(gold[i]);
    pred_count += static_cast<long>(p.size());
    gold_count += static_cast<long>(g.size());
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<std::string> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(both));
    correct += static_cast<long>(both.size());
  }
  CHECK(got.gold_spans == gold_count);
  CHECK(got.pred_spans == pred_count);
  CHECK(got.correct_spans == correct);
  const double precision = pred_count ? double(correct) / pred_count : 0.0;
  const double recall = gold_count ? double(correct) / gold_count : 0.0;
  const double f1 = (precision + recall) > 0
                        ? 2 * precision * recall / (precision + recall)
                        : 0.0;
  CHECK(got.f1 == doctest::Approx(f1).epsilon(1e-12));
}

TEST_CASE("overall accuracy requires both tasks to be exactly right") {
  std::vector<std::set<std::string>> intents = {{"A"}, {"B"}};
  std::vector<std::vector<std::string>> tags = {{"O", "B-a"}, {"B-b"}};

  CHECK(overall_accuracy(intents, intents, tags, tags) == 1.0);

  auto wrong_tags = tags;
  wrong_tags[0][0] = "B-a";
  wrong_tags[1][0] = "O";
  CHECK(overall_accuracy(intents, intents, wrong_tags, tags) == 0.0);
}

TEST_CASE("metrics agree with brute-force oracles on random corpora") {
  std::mt19937_64 rng(72);
  for (int corpus = 0; corpus < 20; ++corpus) {
    std::uniform_int_distribution<int> size(1, 12);
    const int n = size(rng);
    std::vector<std::set<std::string>> pred_intents, gold_intents;
    std::vector<std::vector<std::string>> pred_tags, gold_tags;
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> len(1, 8);
      const int tokens = len(rng);
      pred_intents.push_back(random_intents(4, rng));
      gold_intents.push_back(random_intents(4, rng));
      pred_tags.push_back(random_tags(tokens, 2, rng));
      gold_tags.push_back(random_tags(tokens, 2, rng));
    }

    long intent_ok = 0, both_ok = 0, seq_ok = 0;
    for (int i = 0; i < n; ++i) {
      const bool intents_equal = pred_intents[static_cast<size_t>(i)] ==
                                 gold_intents[static_cast<size_t>(i)];
      const bool tags_equal =
          pred_tags[static_cast<size_t>(i)] == gold_tags[static_cast<size_t>(i)];
      if (intents_equal) ++intent_ok;
      if (tags_equal) ++seq_ok;
      if (intents_equal && tags_equal) ++both_ok;
    }
    const double expected_intent = double(intent_ok) / n;
    const double expected_overall = double(both_ok) / n;

    EvalReport report =
        evaluate(pred_intents, gold_intents, pred_tags, gold_tags);
    CHECK(report.intent_accuracy == doctest::Approx(expected_intent));
    CHECK(report.overall_accuracy == doctest::Approx(expected_overall));
    CHECK(report.exact_sequence_accuracy == doctest::Approx(double(seq_ok) / n));

    // overall <= min(intent accuracy, exact sequence accuracy)
    CHECK(report.overall_accuracy <= report.intent_accuracy + 1e-12);
    CHECK(report.overall_accuracy <= report.exact_sequence_accuracy + 1e-12);
  }
}

TEST_CASE("slot F1 is invariant to utterance order") {
  std::mt19937_64 rng(73);
  std::vector<std::vector<std::string>> pred, gold;
  for (int i = 0; i < 10; ++i) {
    pred.push_back(random_tags(6, 3, rng));
    gold.push_back(random_tags(6, 3, rng));
  }
  SpanF1 before = slot_f1(pred, gold);
  std::vector<int> order = {9, 3, 0, 7, 1, 8, 2, 6, 4, 5};
  std::vector<std::vector<std::string>> pred2, gold2;
  for (int i : order) {
    pred2.push_back(pred[static_cast<size_t>(i)]);
    gold2.push_back(gold[static_cast<size_t>(i)]);
  }
  SpanF1 after = slot_f1(pred2, gold2);
  CHECK(before.f1 == after.f1);
  CHECK(before.precision == after.precision);
  CHECK(before.recall == after.recall);
}

TEST_CASE("report renders both table and key-value forms") {
  std::vector<std::set<std::string>> intents = {{"A"}};
  std::vector<std::vector<std::string>> tags = {{"B-a", "O"}};
  EvalReport report = evaluate(intents, intents, tags, tags);
  const std::string table = report_table(report);
  CHECK(table.find("overall accuracy") != std::string::npos);
  const std::string kv = report_key_values(report);
  CHECK(kv.find("overall_accuracy 1") != std::string::npos);
  CHECK(kv.find("slot_f1 1") != std::string::npos);
}
