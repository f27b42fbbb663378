#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace misca {

// One utterance: tokens, per-token BIO tags, and a sorted set of intents.
struct Sample {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<std::string> intents;  // sorted, unique, size >= 1

  bool operator==(const Sample&) const = default;
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

struct ParseStats {
  int samples = 0;
  int bio_repairs = 0;  // I-x without an open B-x/I-x rewritten to B-x
};

// Corpus file format: blank-line separated blocks. Each block holds one
// "token<sep>tag" line per token (sep = spaces or tabs) followed by a final
// line with the intent label(s) joined by '#'.
std::vector<Sample> parse_corpus(std::istream& in, ParseStats* stats = nullptr);
std::vector<Sample> parse_corpus(const std::filesystem::path& path,
                                 ParseStats* stats = nullptr);

// Inverse of parsing: one block in the corpus format, with a trailing blank
// line so blocks can be concatenated.
std::string format_sample(const Sample& s);
void write_corpus(const std::filesystem::path& path,
                  const std::vector<Sample>& samples);

// Intent label set plus the slot label hierarchy. Level `levels` holds the
// fine-grained labels observed in training data; with levels == 2, level 1
// holds the coarse prefixes (substring before the first '.').
struct LabelHierarchy {
  std::vector<std::string> intent_labels;             // lexicographic
  std::vector<std::vector<std::string>> slot_levels;  // [0] = level 1, ...
  std::map<std::string, std::string> parent;          // fine -> coarse
  bool degenerate = false;  // levels == 2 but no label has a '.' prefix

  int levels() const { return static_cast<int>(slot_levels.size()); }
  const std::vector<std::string>& fine_labels() const {
    return slot_levels.back();
  }
  int bio_tag_count() const {
    return 2 * static_cast<int>(fine_labels().size()) + 1;
  }

  // BIO tag inventory: "O" first, then B-/I- pairs per fine label in
  // lexicographic label order. Index 0 is always "O".
  const std::vector<std::string>& tag_names() const { return tag_names_; }
  int tag_index(const std::string& tag) const;      // -1 if unknown
  int intent_index(const std::string& label) const;  // -1 if unknown
  int level_label_index(int level, const std::string& label) const;

  static std::string coarse_of(const std::string& fine_label);

  void finalize();  // rebuilds tag/index caches after the label lists change

 private:
  std::vector<std::string> tag_names_;
  std::unordered_map<std::string, int> tag_ids_;
  std::unordered_map<std::string, int> intent_ids_;
  std::vector<std::unordered_map<std::string, int>> level_ids_;
};

LabelHierarchy build_hierarchy(const std::vector<Sample>& train, int levels);

// Word/character vocabularies. Words are lowercased; characters keep the
// original case. Id 0 is padding, id 1 is the unknown symbol.
struct Vocab {
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  std::vector<std::string> words;  // id -> surface, [0]="<pad>", [1]="<unk>"
  std::vector<char> chars;

  int word_id(const std::string& token) const;  // lowercases, UNK fallback
  int char_id(char c) const;
  int word_count() const { return static_cast<int>(words.size()); }
  int char_count() const { return static_cast<int>(chars.size()); }

  void finalize();

 private:
  std::unordered_map<std::string, int> word_ids_;
  std::unordered_map<char, int> char_ids_;
};

Vocab build_vocab(const std::vector<Sample>& train);

// Everything derived from the training split that the model needs.
struct CorpusIndex {
  Vocab vocab;
  LabelHierarchy hierarchy;
  int max_intents = 1;  // largest gold intent count in training data
};

CorpusIndex build_index(const std::vector<Sample>& train, int levels);

// Padded, masked batch. Row-major [utterance][position] layouts; char ids
// additionally run over [char] within a position.
struct Batch {
  int size = 0;          // utterances in this batch
  int max_len = 0;       // tokens after padding
  int max_word_len = 0;  // characters after padding
  std::vector<int> token_ids;          // size * max_len
  std::vector<int> char_ids;           // size * max_len * max_word_len
  std::vector<std::uint8_t> mask;      // size * max_len, 1 = real token
  std::vector<int> gold_tags;          // size * max_len, 0 where padded
  std::vector<std::uint8_t> gold_intents;  // size * |L^I| multi-hot
  std::vector<int> gold_intent_count;      // size, clamped to [1, z]
  std::vector<int> sample_index;           // size, position in the input list

  int length_of(int row) const;
  int token_at(int row, int pos) const {
    return token_ids[static_cast<size_t>(row) * max_len + pos];
  }
};

std::vector<Batch> make_batches(const std::vector<Sample>& samples,
                                const CorpusIndex& index, int batch_size,
                                std::optional<std::uint64_t> shuffle_seed);

// Human-readable dump of the label inventory and vocabularies, one
// level-tagged entry per line.
void write_index_sidecar(const std::filesystem::path& path,
                         const CorpusIndex& index);

// Train/validation/test splits as found in a dataset directory containing
// train.txt, dev.txt and test.txt.
struct CorpusSplits {
  std::vector<Sample> train, dev, test;
  ParseStats train_stats, dev_stats, test_stats;
};

CorpusSplits load_splits(const std::filesystem::path& dataset_dir);

}  // namespace misca
