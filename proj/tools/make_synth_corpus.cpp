// Writes the small generated corpus (train/dev/test) used by the README
// walkthrough and the smoke tests.
#include <cstdint>
#include <iostream>
#include <string>

#include "misca/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::cerr << "usage: misca_make_synth_corpus <out-dir> [seed]\n";
    return 1;
  }
  misca::SyntheticSpec spec;
  if (argc == 3) spec.seed = std::stoull(argv[2]);
  misca::write_synthetic_corpus(argv[1], spec);
  std::cout << "wrote train.txt dev.txt test.txt under " << argv[1] << "\n";
  return 0;
}
