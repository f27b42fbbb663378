#include "misca/synthetic.hpp"

#include <random>

namespace misca {

namespace {

struct SlotValue {
  std::vector<std::string> words;
  std::string label;
};

const std::vector<SlotValue> kCities = {
    {{"paris"}, "loc.city"},      {{"tokyo"}, "loc.city"},
    {{"hanoi"}, "loc.city"},      {{"new", "york"}, "loc.city"},
};
const std::vector<SlotValue> kStates = {
    {{"texas"}, "loc.state"},
    {{"ohio"}, "loc.state"},
};
const std::vector<SlotValue> kDays = {
    {{"monday"}, "time.day"},
    {{"friday"}, "time.day"},
    {{"next", "sunday"}, "time.day"},
};
const std::vector<SlotValue> kHours = {
    {{"noon"}, "time.hour"},
    {{"dawn"}, "time.hour"},
};

void append_slot(Sample& s, const SlotValue& v) {
  for (size_t i = 0; i < v.words.size(); ++i) {
    s.tokens.push_back(v.words[i]);
    s.tags.push_back((i == 0 ? "B-" : "I-") + v.label);
  }
}

void append_plain(Sample& s, std::initializer_list<const char*> words) {
  for (const char* w : words) {
    s.tokens.push_back(w);
    s.tags.push_back("O");
  }
}

template <typename Rng>
const SlotValue& pick(const std::vector<SlotValue>& values, Rng& rng) {
  std::uniform_int_distribution<size_t> dist(0, values.size() - 1);
  return values[dist(rng)];
}

template <typename Rng>
Sample make_clause(int intent_id, Rng& rng) {
  Sample s;
  switch (intent_id) {
    case 0:
      s.intents = {"find_flight"};
      append_plain(s, {"find", "flight", "to"});
      append_slot(s, pick(kCities, rng));
      append_plain(s, {"on"});
      append_slot(s, pick(kDays, rng));
      break;
    case 1:
      s.intents = {"book_hotel"};
      append_plain(s, {"book", "hotel", "in"});
      append_slot(s, pick(kStates, rng));
      append_plain(s, {"at"});
      append_slot(s, pick(kHours, rng));
      break;
    default:
      s.intents = {"get_weather"};
      append_plain(s, {"show", "weather", "in"});
      append_slot(s, pick(kCities, rng));
      append_plain(s, {"on"});
      append_slot(s, pick(kDays, rng));
      break;
  }
  return s;
}

Sample join_clauses(const Sample& a, const Sample& b) {
  Sample s = a;
  s.tokens.push_back("and");
  s.tags.push_back("O");
  s.tokens.insert(s.tokens.end(), b.tokens.begin(), b.tokens.end());
  s.tags.insert(s.tags.end(), b.tags.begin(), b.tags.end());
  s.intents.insert(s.intents.end(), b.intents.begin(), b.intents.end());
  std::sort(s.intents.begin(), s.intents.end());
  s.intents.erase(std::unique(s.intents.begin(), s.intents.end()),
                  s.intents.end());
  return s;
}

}  // namespace

std::vector<Sample> make_synthetic_samples(int count, std::uint64_t seed,
                                           double multi_intent_prob) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> intent_dist(0, 2);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<Sample> samples;
  for (int i = 0; i < count; ++i) {
    // The first six samples enumerate every single intent and every
    // intent pair so small splits still cover the full label inventory.
    if (i < 3) {
      samples.push_back(make_clause(i, rng));
      continue;
    }
    if (i < 6) {
      const int first = i - 3;
      const int second = (first + 1) % 3;
      samples.push_back(
          join_clauses(make_clause(first, rng), make_clause(second, rng)));
      continue;
    }
    const int intent = intent_dist(rng);
    if (coin(rng) < multi_intent_prob) {
      int other = intent_dist(rng);
      if (other == intent) other = (other + 1) % 3;
      samples.push_back(
          join_clauses(make_clause(intent, rng), make_clause(other, rng)));
    } else {
      samples.push_back(make_clause(intent, rng));
    }
  }
  return samples;
}

void write_synthetic_corpus(const std::filesystem::path& dir,
                            const SyntheticSpec& spec) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "train.txt",
               make_synthetic_samples(spec.train_count, spec.seed,
                                      spec.multi_intent_prob));
  write_corpus(dir / "dev.txt",
               make_synthetic_samples(spec.val_count, spec.seed + 1,
                                      spec.multi_intent_prob));
  write_corpus(dir / "test.txt",
               make_synthetic_samples(spec.test_count, spec.seed + 2,
                                      spec.multi_intent_prob));
}

}  // namespace misca
