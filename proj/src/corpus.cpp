#include "misca/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace misca {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream is(line);
  std::string f;
  while (is >> f) fields.push_back(f);
  return fields;
}

bool valid_tag(const std::string& tag) {
  if (tag == "O") return true;
  if (tag.size() < 3) return false;
  return (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

// Rewrites I-x tags that do not continue an open B-x/I-x span.
int repair_bio(std::vector<std::string>& tags) {
  int repairs = 0;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].rfind("I-", 0) != 0) continue;
    const std::string label = tags[i].substr(2);
    const bool open = i > 0 && (tags[i - 1] == "B-" + label ||
                                tags[i - 1] == "I-" + label);
    if (!open) {
      tags[i] = "B-" + label;
      ++repairs;
    }
  }
  return repairs;
}

std::vector<std::string> split_intents(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : joined) {
    if (c == '#') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<Sample> parse_corpus(std::istream& in, ParseStats* stats) {
  std::vector<Sample> samples;
  ParseStats local;

  std::vector<std::pair<int, std::string>> block;  // (line number, text)
  std::string line;
  int line_no = 0;

  auto flush_block = [&]() {
    if (block.empty()) return;
    if (block.size() < 2) {
      throw ParseError(block.front().first,
                       "block needs at least one token line and an intent "
                       "line");
    }
    Sample s;
    for (size_t i = 0; i + 1 < block.size(); ++i) {
      const auto& [ln, text] = block[i];
      const auto fields = split_fields(text);
      if (fields.size() != 2) {
        throw ParseError(ln, "expected 'token tag', got " +
                                 std::to_string(fields.size()) + " fields");
      }
      if (!valid_tag(fields[1])) {
        throw ParseError(ln, "invalid BIO tag '" + fields[1] + "'");
      }
      s.tokens.push_back(fields[0]);
      s.tags.push_back(fields[1]);
    }
    const auto& [intent_ln, intent_text] = block.back();
    const auto intent_fields = split_fields(intent_text);
    if (intent_fields.size() != 1) {
      throw ParseError(intent_ln, "missing intent line (last line of a block "
                                  "must hold only the intent labels)");
    }
    s.intents = split_intents(intent_fields[0]);
    if (s.intents.empty()) {
      throw ParseError(intent_ln, "empty intent list");
    }
    local.bio_repairs += repair_bio(s.tags);
    ++local.samples;
    samples.push_back(std::move(s));
    block.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_fields(line).empty()) {
      flush_block();
    } else {
      block.emplace_back(line_no, line);
    }
  }
  flush_block();

  if (stats) *stats = local;
  return samples;
}

std::vector<Sample> parse_corpus(const std::filesystem::path& path,
                                 ParseStats* stats) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open corpus file: " + path.string());
  }
  return parse_corpus(in, stats);
}

std::string format_sample(const Sample& s) {
  std::ostringstream os;
  for (size_t i = 0; i < s.tokens.size(); ++i) {
    os << s.tokens[i] << ' ' << s.tags[i] << '\n';
  }
  for (size_t i = 0; i < s.intents.size(); ++i) {
    os << (i ? "#" : "") << s.intents[i];
  }
  os << "\n\n";
  return os.str();
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write corpus file: " + path.string());
  }
  for (const auto& s : samples) out << format_sample(s);
}

// ---- LabelHierarchy ------------------------------------------------------

std::string LabelHierarchy::coarse_of(const std::string& fine_label) {
  const auto dot = fine_label.find('.');
  return dot == std::string::npos ? fine_label : fine_label.substr(0, dot);
}

void LabelHierarchy::finalize() {
  tag_names_.clear();
  tag_names_.push_back("O");
  for (const auto& label : fine_labels()) {
    tag_names_.push_back("B-" + label);
    tag_names_.push_back("I-" + label);
  }
  tag_ids_.clear();
  for (size_t i = 0; i < tag_names_.size(); ++i) {
    tag_ids_[tag_names_[i]] = static_cast<int>(i);
  }
  intent_ids_.clear();
  for (size_t i = 0; i < intent_labels.size(); ++i) {
    intent_ids_[intent_labels[i]] = static_cast<int>(i);
  }
  level_ids_.assign(slot_levels.size(), {});
  for (size_t k = 0; k < slot_levels.size(); ++k) {
    for (size_t i = 0; i < slot_levels[k].size(); ++i) {
      level_ids_[k][slot_levels[k][i]] = static_cast<int>(i);
    }
  }
}

int LabelHierarchy::tag_index(const std::string& tag) const {
  auto it = tag_ids_.find(tag);
  return it == tag_ids_.end() ? -1 : it->second;
}

int LabelHierarchy::intent_index(const std::string& label) const {
  auto it = intent_ids_.find(label);
  return it == intent_ids_.end() ? -1 : it->second;
}

int LabelHierarchy::level_label_index(int level,
                                      const std::string& label) const {
  const auto& ids = level_ids_.at(static_cast<size_t>(level));
  auto it = ids.find(label);
  return it == ids.end() ? -1 : it->second;
}

LabelHierarchy build_hierarchy(const std::vector<Sample>& train, int levels) {
  if (levels != 1 && levels != 2) {
    throw std::invalid_argument("build_hierarchy: levels must be 1 or 2, got " +
                                std::to_string(levels));
  }
  std::set<std::string> intents;
  std::set<std::string> fine;
  for (const auto& s : train) {
    intents.insert(s.intents.begin(), s.intents.end());
    for (const auto& tag : s.tags) {
      if (tag != "O") fine.insert(tag.substr(2));
    }
  }

  LabelHierarchy h;
  h.intent_labels.assign(intents.begin(), intents.end());
  std::vector<std::string> fine_sorted(fine.begin(), fine.end());

  if (levels == 1) {
    h.slot_levels = {fine_sorted};
  } else {
    std::set<std::string> coarse;
    for (const auto& f : fine_sorted) {
      const std::string c = LabelHierarchy::coarse_of(f);
      h.parent[f] = c;
      coarse.insert(c);
    }
    h.slot_levels = {std::vector<std::string>(coarse.begin(), coarse.end()),
                     fine_sorted};
    h.degenerate = coarse.size() == fine_sorted.size() &&
                   std::none_of(fine_sorted.begin(), fine_sorted.end(),
                                [](const std::string& f) {
                                  return f.find('.') != std::string::npos;
                                });
  }
  h.finalize();
  return h;
}

// ---- Vocab ----------------------------------------------------------------

void Vocab::finalize() {
  word_ids_.clear();
  for (size_t i = 0; i < words.size(); ++i) {
    word_ids_[words[i]] = static_cast<int>(i);
  }
  char_ids_.clear();
  for (size_t i = 0; i < chars.size(); ++i) {
    char_ids_[chars[i]] = static_cast<int>(i);
  }
}

int Vocab::word_id(const std::string& token) const {
  auto it = word_ids_.find(lowercase(token));
  return it == word_ids_.end() ? kUnkId : it->second;
}

int Vocab::char_id(char c) const {
  auto it = char_ids_.find(c);
  return it == char_ids_.end() ? kUnkId : it->second;
}

Vocab build_vocab(const std::vector<Sample>& train) {
  std::set<std::string> words;
  std::set<char> chars;
  for (const auto& s : train) {
    for (const auto& tok : s.tokens) {
      words.insert(lowercase(tok));
      chars.insert(tok.begin(), tok.end());
    }
  }
  Vocab v;
  v.words = {"<pad>", "<unk>"};
  v.words.insert(v.words.end(), words.begin(), words.end());
  v.chars = {'\0', '\1'};  // pad, unk placeholders
  v.chars.insert(v.chars.end(), chars.begin(), chars.end());
  v.finalize();
  return v;
}

CorpusIndex build_index(const std::vector<Sample>& train, int levels) {
  CorpusIndex index;
  index.vocab = build_vocab(train);
  index.hierarchy = build_hierarchy(train, levels);
  index.max_intents = 1;
  for (const auto& s : train) {
    index.max_intents =
        std::max(index.max_intents, static_cast<int>(s.intents.size()));
  }
  return index;
}

// ---- Batching ---------------------------------------------------------------

int Batch::length_of(int row) const {
  int n = 0;
  for (int i = 0; i < max_len; ++i) {
    if (mask[static_cast<size_t>(row) * max_len + i]) ++n;
  }
  return n;
}

std::vector<Batch> make_batches(const std::vector<Sample>& samples,
                                const CorpusIndex& index, int batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size <= 0) {
    throw std::invalid_argument("make_batches: batch_size must be positive");
  }
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  const int intents = static_cast<int>(index.hierarchy.intent_labels.size());
  std::vector<Batch> batches;
  for (size_t begin = 0; begin < order.size(); begin += batch_size) {
    const size_t end = std::min(order.size(), begin + batch_size);
    Batch b;
    b.size = static_cast<int>(end - begin);
    for (size_t i = begin; i < end; ++i) {
      const Sample& s = samples[static_cast<size_t>(order[i])];
      b.max_len = std::max(b.max_len, static_cast<int>(s.tokens.size()));
      for (const auto& tok : s.tokens) {
        b.max_word_len =
            std::max(b.max_word_len, static_cast<int>(tok.size()));
      }
    }
    b.token_ids.assign(static_cast<size_t>(b.size) * b.max_len, Vocab::kPadId);
    b.char_ids.assign(
        static_cast<size_t>(b.size) * b.max_len * b.max_word_len,
        Vocab::kPadId);
    b.mask.assign(static_cast<size_t>(b.size) * b.max_len, 0);
    b.gold_tags.assign(static_cast<size_t>(b.size) * b.max_len, 0);
    b.gold_intents.assign(static_cast<size_t>(b.size) * intents, 0);
    b.gold_intent_count.assign(static_cast<size_t>(b.size), 1);
    b.sample_index.assign(static_cast<size_t>(b.size), 0);

    for (size_t i = begin; i < end; ++i) {
      const int row = static_cast<int>(i - begin);
      const Sample& s = samples[static_cast<size_t>(order[i])];
      b.sample_index[static_cast<size_t>(row)] = order[i];
      for (size_t t = 0; t < s.tokens.size(); ++t) {
        const size_t pos = static_cast<size_t>(row) * b.max_len + t;
        b.token_ids[pos] = index.vocab.word_id(s.tokens[t]);
        b.mask[pos] = 1;
        const int tag = index.hierarchy.tag_index(s.tags[t]);
        b.gold_tags[pos] = tag >= 0 ? tag : 0;  // unseen eval tag -> "O"
        for (size_t c = 0; c < s.tokens[t].size(); ++c) {
          b.char_ids[(pos * b.max_word_len) + c] =
              index.vocab.char_id(s.tokens[t][c]);
        }
      }
      int represented = 0;
      for (const auto& intent : s.intents) {
        const int id = index.hierarchy.intent_index(intent);
        if (id >= 0) {  // eval-only intents stay out of the multi-hot row
          b.gold_intents[static_cast<size_t>(row) * intents + id] = 1;
          ++represented;
        }
      }
      b.gold_intent_count[static_cast<size_t>(row)] =
          std::clamp(represented, 1, index.max_intents);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void write_index_sidecar(const std::filesystem::path& path,
                         const CorpusIndex& index) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write sidecar file: " + path.string());
  }
  for (const auto& label : index.hierarchy.intent_labels) {
    out << "intent\t" << label << '\n';
  }
  for (int k = 0; k < index.hierarchy.levels(); ++k) {
    for (const auto& label : index.hierarchy.slot_levels[k]) {
      out << "slot." << (k + 1) << '\t' << label << '\n';
    }
  }
  for (const auto& tag : index.hierarchy.tag_names()) {
    out << "tag\t" << tag << '\n';
  }
  out << "max_intents\t" << index.max_intents << '\n';
  for (const auto& w : index.vocab.words) out << "word\t" << w << '\n';
  for (char c : index.vocab.chars) {
    out << "char\t" << (std::isprint(static_cast<unsigned char>(c))
                            ? std::string(1, c)
                            : "\\x" + std::to_string(static_cast<int>(c)))
        << '\n';
  }
}

CorpusSplits load_splits(const std::filesystem::path& dataset_dir) {
  CorpusSplits splits;
  splits.train = parse_corpus(dataset_dir / "train.txt", &splits.train_stats);
  splits.dev = parse_corpus(dataset_dir / "dev.txt", &splits.dev_stats);
  splits.test = parse_corpus(dataset_dir / "test.txt", &splits.test_stats);
  return splits;
}

}  // namespace misca
