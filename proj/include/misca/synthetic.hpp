#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "misca/corpus.hpp"

namespace misca {

// Small generated corpus for smoke training and demos: 3 intents, 4
// fine-grained slot labels under 2 coarse prefixes (loc.*, time.*), and
// multi-intent utterances joined with '#'. Slot values determine their tag
// and every intent has a unique trigger word, so a small model can reach
// perfect validation accuracy.
struct SyntheticSpec {
  int train_count = 20;
  int val_count = 10;
  int test_count = 10;
  std::uint64_t seed = 7;
  double multi_intent_prob = 0.5;
};

std::vector<Sample> make_synthetic_samples(int count, std::uint64_t seed,
                                           double multi_intent_prob = 0.5);

// Writes train.txt / dev.txt / test.txt under `dir`.
void write_synthetic_corpus(const std::filesystem::path& dir,
                            const SyntheticSpec& spec = {});

}  // namespace misca
