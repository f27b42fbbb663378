#include "misca/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace misca {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::to_key_values() const {
  std::ostringstream os;
  os << "dataset_dir " << dataset_dir << "\n";
  os << "levels " << levels << "\n";
  os << "word_dim " << dims.word_dim << "\n";
  os << "word_hidden " << dims.word_hidden << "\n";
  os << "attn_dim " << dims.attn_dim << "\n";
  os << "attn_qk_dim " << dims.attn_qk_dim << "\n";
  os << "char_dim " << dims.char_dim << "\n";
  os << "char_hidden " << dims.char_hidden << "\n";
  os << "task_hidden " << dims.task_hidden << "\n";
  os << "d_a " << dims.d_a << "\n";
  os << "d_p " << dims.d_p << "\n";
  os << "d_s " << dims.d_s << "\n";
  os << "d " << dims.d << "\n";
  os << "ablation " << ablation << "\n";
  os << "lambda " << fmt_double(lambda) << "\n";
  os << "lr " << fmt_double(lr) << "\n";
  os << "weight_decay " << fmt_double(weight_decay) << "\n";
  os << "beta1 " << fmt_double(beta1) << "\n";
  os << "beta2 " << fmt_double(beta2) << "\n";
  os << "adam_eps " << fmt_double(adam_eps) << "\n";
  os << "batch_size " << batch_size << "\n";
  os << "epochs " << epochs << "\n";
  os << "seed " << seed << "\n";
  os << "clip_norm " << fmt_double(clip_norm) << "\n";
  os << "coarse_label_loss " << fmt_double(coarse_label_loss) << "\n";
  os << "hard_bio " << (hard_bio ? 1 : 0) << "\n";
  return os.str();
}

void TrainConfig::set_field(const std::string& key, const std::string& value) {
  const auto as_int = [&] { return std::stoi(value); };
  const auto as_double = [&] { return std::stod(value); };
  if (key == "dataset_dir") dataset_dir = value;
  else if (key == "levels") levels = as_int();
  else if (key == "word_dim") dims.word_dim = as_int();
  else if (key == "word_hidden") dims.word_hidden = as_int();
  else if (key == "attn_dim") dims.attn_dim = as_int();
  else if (key == "attn_qk_dim") dims.attn_qk_dim = as_int();
  else if (key == "char_dim") dims.char_dim = as_int();
  else if (key == "char_hidden") dims.char_hidden = as_int();
  else if (key == "task_hidden") dims.task_hidden = as_int();
  else if (key == "d_a") dims.d_a = as_int();
  else if (key == "d_p") dims.d_p = as_int();
  else if (key == "d_s") dims.d_s = as_int();
  else if (key == "d") dims.d = as_int();
  else if (key == "ablation") ablation = value;
  else if (key == "lambda") lambda = as_double();
  else if (key == "lr") lr = as_double();
  else if (key == "weight_decay") weight_decay = as_double();
  else if (key == "beta1") beta1 = as_double();
  else if (key == "beta2") beta2 = as_double();
  else if (key == "adam_eps") adam_eps = as_double();
  else if (key == "batch_size") batch_size = as_int();
  else if (key == "epochs") epochs = as_int();
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "clip_norm") clip_norm = as_double();
  else if (key == "coarse_label_loss") coarse_label_loss = as_double();
  else if (key == "hard_bio") hard_bio = as_int() != 0;
  else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_key_values(std::istream& in) {
  TrainConfig c;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key, value;
    ls >> key;
    std::getline(ls, value);
    const auto first = value.find_first_not_of(" \t");
    value = first == std::string::npos ? "" : value.substr(first);
    c.set_field(key, value);
  }
  return c;
}

Value joint_loss(Tape& tape, Value intent_bce, Value count_ce, Value slot_nll,
                 double lambda) {
  Value intent_total = tape.add(intent_bce, count_ce);
  return tape.add(tape.scale(intent_total, lambda),
                  tape.scale(slot_nll, 1.0 - lambda));
}

UtteranceLoss utterance_loss(Tape& tape, MiscaModel& model,
                             const UtteranceForward& fwd, const Batch& batch,
                             int row, const TrainConfig& config) {
  const int intents = model.intent_count();
  Matrix targets(intents, 1);
  for (int j = 0; j < intents; ++j) {
    targets.at(j, 0) =
        batch.gold_intents[static_cast<size_t>(row) * intents + j] ? 1.0 : 0.0;
  }

  UtteranceLoss loss;
  loss.intent_bce = tape.bce_with_logits(fwd.intent_logits, targets);
  loss.count_ce = tape.ce_with_logits(
      fwd.count_logits, batch.gold_intent_count[static_cast<size_t>(row)] - 1);

  std::vector<int> gold_tags(static_cast<size_t>(fwd.n));
  for (int t = 0; t < fwd.n; ++t) {
    gold_tags[static_cast<size_t>(t)] =
        batch.gold_tags[static_cast<size_t>(row) * batch.max_len + t];
  }
  loss.slot_nll = tape.crf_nll(fwd.emissions,
                               tape.leaf(model.crf.transitions), gold_tags);
  loss.joint =
      joint_loss(tape, loss.intent_bce, loss.count_ce, loss.slot_nll,
                 config.lambda);

  if (config.coarse_label_loss > 0.0 && !fwd.hierarchy_logits.empty()) {
    const auto& hier = model.index.hierarchy;
    for (size_t link = 0; link < fwd.hierarchy_logits.size(); ++link) {
      const auto& level_labels = hier.slot_levels[link];
      Matrix coarse_targets(static_cast<int>(level_labels.size()), 1);
      for (int t = 0; t < fwd.n; ++t) {
        const int tag = gold_tags[static_cast<size_t>(t)];
        if (tag == 0) continue;
        std::string fine = hier.tag_names()[static_cast<size_t>(tag)].substr(2);
        // Ancestor at this level: the coarse prefix for level 1, the label
        // itself at the fine level.
        const std::string ancestor = link + 1 < hier.slot_levels.size()
                                         ? LabelHierarchy::coarse_of(fine)
                                         : fine;
        const int id = hier.level_label_index(static_cast<int>(link), ancestor);
        if (id >= 0) coarse_targets.at(id, 0) = 1.0;
      }
      Value aux = tape.bce_with_logits(fwd.hierarchy_logits[link],
                                       coarse_targets);
      loss.joint = tape.add(loss.joint,
                            tape.scale(aux, config.coarse_label_loss));
    }
  }
  return loss;
}

// ---- AdamW ----------------------------------------------------------------

AdamW::AdamW(std::vector<Parameter*> params, const TrainConfig& config)
    : params_(std::move(params)),
      lr_(config.lr),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay),
      clip_norm_(config.clip_norm) {
  for (Parameter* p : params_) {
    m_.push_back(Matrix::zeros(p->value.rows, p->value.cols));
    v_.push_back(Matrix::zeros(p->value.rows, p->value.cols));
  }
}

void AdamW::step() {
  ++t_;
  double scale = 1.0;
  if (clip_norm_ > 0.0) {
    double sq = 0.0;
    for (Parameter* p : params_) {
      for (double g : p->grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm_) scale = clip_norm_ / norm;
  }
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    for (size_t j = 0; j < p.value.data.size(); ++j) {
      const double g = p.grad.data[j] * scale;
      m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
      v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i].data[j] / bc1;
      const double v_hat = v_[i].data[j] / bc2;
      p.value.data[j] -= lr_ * (m_hat / (std::sqrt(v_hat) + eps_) +
                                weight_decay_ * p.value.data[j]);
    }
    p.reset_grad();
  }
}

// ---- Checkpoints ------------------------------------------------------------

Checkpoint snapshot(const MiscaModel& model, const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.config = config;
  for (const Parameter* p : model.parameters()) {
    ckpt.tensors.emplace_back(p->name, p->value);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  out << "MISCA-CKPT 1\n";
  const std::string config_kv = ckpt.config.to_key_values();
  const long config_lines = std::count(config_kv.begin(), config_kv.end(), '\n');
  out << "[config] " << config_lines << "\n" << config_kv;
  out << "[best] epoch " << ckpt.best_epoch << " val_overall "
      << fmt_double(ckpt.best_val_overall) << "\n";
  out << "[tensors] " << ckpt.tensors.size() << "\n";
  char buf[64];
  for (const auto& [name, value] : ckpt.tensors) {
    out << name << ' ' << value.rows << ' ' << value.cols << '\n';
    for (int i = 0; i < value.rows; ++i) {
      for (int j = 0; j < value.cols; ++j) {
        // Hexfloat: exact round trip for doubles.
        std::snprintf(buf, sizeof(buf), "%a", value.at(i, j));
        out << (j ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "[end]\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "MISCA-CKPT 1") {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  Checkpoint ckpt;
  std::string token;
  long config_lines = 0;
  in >> token >> config_lines;
  if (token != "[config]") {
    throw std::runtime_error("checkpoint missing [config] section");
  }
  std::getline(in, line);  // finish the header line
  std::ostringstream config_text;
  for (long i = 0; i < config_lines; ++i) {
    std::getline(in, line);
    config_text << line << '\n';
  }
  std::istringstream config_in(config_text.str());
  ckpt.config = TrainConfig::from_key_values(config_in);

  in >> token;
  if (token != "[best]") {
    throw std::runtime_error("checkpoint missing [best] section");
  }
  in >> token >> ckpt.best_epoch >> token >> ckpt.best_val_overall;

  size_t tensor_count = 0;
  in >> token >> tensor_count;
  if (token != "[tensors]") {
    throw std::runtime_error("checkpoint missing [tensors] section");
  }
  for (size_t k = 0; k < tensor_count; ++k) {
    std::string name;
    int rows = 0, cols = 0;
    in >> name >> rows >> cols;
    Matrix m(rows, cols);
    for (auto& v : m.data) {
      in >> token;
      v = std::strtod(token.c_str(), nullptr);
    }
    if (!in) {
      throw std::runtime_error("checkpoint truncated while reading tensor '" +
                               name + "'");
    }
    ckpt.tensors.emplace_back(name, std::move(m));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, MiscaModel& model) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, value] : ckpt.tensors) by_name[name] = &value;
  for (Parameter* p : model.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint mismatch: tensor '" + p->name +
                               "' is missing from the checkpoint");
    }
    if (!it->second->same_shape(p->value)) {
      throw std::runtime_error(
          "checkpoint mismatch: tensor '" + p->name + "' has shape " +
          it->second->shape_str() + " but the model expects " +
          p->value.shape_str());
    }
    p->value = *it->second;
    p->reset_grad();
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw std::runtime_error("checkpoint mismatch: tensor '" +
                             by_name.begin()->first +
                             "' has no slot in the model");
  }
}

// ---- Training loop ----------------------------------------------------------

SplitEval evaluate_split(MiscaModel& model, const std::vector<Sample>& samples,
                         bool hard_bio) {
  SplitEval out;
  std::vector<std::set<std::string>> pred_intents, gold_intents;
  std::vector<std::vector<std::string>> pred_tags, gold_tags;
  Tape tape;
  for (const Sample& s : samples) {
    tape.reset();
    TokenIds ids = ids_for_sample(s, model.index.vocab);
    UtteranceForward fwd = forward_utterance(tape, model, ids);
    DecodedPrediction pred = decode_utterance(model, fwd, tape, hard_bio);
    pred_intents.emplace_back(pred.intents.begin(), pred.intents.end());
    gold_intents.emplace_back(s.intents.begin(), s.intents.end());
    pred_tags.push_back(pred.tags);
    gold_tags.push_back(s.tags);
    out.predictions.push_back(std::move(pred));
  }
  out.report = evaluate(pred_intents, gold_intents, pred_tags, gold_tags);
  return out;
}

void write_predictions(std::ostream& out, const std::vector<Sample>& samples,
                       const std::vector<DecodedPrediction>& predictions) {
  if (samples.size() != predictions.size()) {
    throw std::invalid_argument("write_predictions: size mismatch");
  }
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const DecodedPrediction& p = predictions[i];
    for (size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t] << '\t' << s.tags[t] << '\t' << p.tags[t] << '\n';
    }
    out << "INTENTS gold=";
    for (size_t j = 0; j < s.intents.size(); ++j) {
      out << (j ? "#" : "") << s.intents[j];
    }
    out << " pred=";
    for (size_t j = 0; j < p.intents.size(); ++j) {
      out << (j ? "#" : "") << p.intents[j];
    }
    out << "\n\n";
  }
}

namespace {

std::string norm_diagnostics(const MiscaModel& model) {
  std::ostringstream os;
  double max_val = 0.0, max_grad = 0.0;
  std::string max_val_name, max_grad_name;
  for (const Parameter* p : model.parameters()) {
    double v = 0.0;
    for (double x : p->value.data) v += x * x;
    v = std::sqrt(v);
    const double g = p->grad_l2();
    if (v > max_val) {
      max_val = v;
      max_val_name = p->name;
    }
    if (g > max_grad) {
      max_grad = g;
      max_grad_name = p->name;
    }
  }
  os << "largest value norm " << max_val << " (" << max_val_name
     << "), largest grad norm " << max_grad << " (" << max_grad_name << ")";
  return os.str();
}

}  // namespace

void ensure_finite_loss(double loss_value, int epoch, long batch_index,
                        const MiscaModel& model) {
  if (std::isfinite(loss_value)) return;
  throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                      ", batch " + std::to_string(batch_index) + "; " +
                      norm_diagnostics(model));
}

TrainResult train(const TrainConfig& config,
                  const std::vector<Sample>& train_split,
                  const std::vector<Sample>& val_split, std::ostream* log) {
  if (config.lambda <= 0.0 || config.lambda >= 1.0) {
    throw std::invalid_argument("train: lambda must lie strictly in (0, 1)");
  }
  CorpusIndex index = build_index(train_split, config.levels);
  MiscaModel model = build_model(index, config.dims, config.ablation_mode(),
                                 config.seed);
  std::vector<Parameter*> params = model.parameters();
  for (Parameter* p : params) p->reset_grad();
  AdamW optimizer(params, config);

  if (log) {
    *log << "# misca train\n";
    *log << "# ablation " << config.ablation << "\n";
    *log << "# parameters " << total_parameter_count(model) << "\n";
    std::istringstream kv(config.to_key_values());
    std::string line;
    while (std::getline(kv, line)) *log << "# " << line << "\n";
  }

  TrainResult result;
  result.best.best_val_overall = -1.0;
  Tape tape;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train_split, index, config.batch_size,
                                      config.seed + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    long utterances = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      tape.reset();
      Value total{};
      for (int row = 0; row < batch.size; ++row) {
        TokenIds ids = ids_for_batch_row(batch, row);
        UtteranceForward fwd = forward_utterance(tape, model, ids);
        UtteranceLoss ul = utterance_loss(tape, model, fwd, batch, row, config);
        total = row == 0 ? ul.joint : tape.add(total, ul.joint);
      }
      Value batch_loss = tape.scale(total, 1.0 / batch.size);
      const double loss_value = tape.val(batch_loss).item();
      ensure_finite_loss(loss_value, epoch, static_cast<long>(bi), model);
      tape.backward(batch_loss);
      optimizer.step();
      loss_sum += loss_value * batch.size;
      utterances += batch.size;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(utterances);
    SplitEval val = evaluate_split(model, val_split, config.hard_bio);
    record.val.intent_accuracy = val.report.intent_accuracy;
    record.val.slot_f1 = val.report.slot.f1;
    record.val.overall_accuracy = val.report.overall_accuracy;
    result.history.push_back(record);

    if (log) {
      *log << "epoch " << epoch << " train_loss " << fmt_double(record.train_loss)
           << " val_intent_acc " << record.val.intent_accuracy
           << " val_slot_f1 " << record.val.slot_f1 << " val_overall_acc "
           << record.val.overall_accuracy << "\n";
    }
    if (record.val.overall_accuracy > result.best.best_val_overall) {
      result.best = snapshot(model, config);
      result.best.best_epoch = epoch;
      result.best.best_val_overall = record.val.overall_accuracy;
    }
  }
  return result;
}

std::vector<Sample> toy_corpus() {
  return {
      {{"go", "paris"}, {"O", "B-loc.city"}, {"alpha"}},
      {{"see", "monday"}, {"O", "B-day.name"}, {"beta"}},
      {{"go", "hanoi"}, {"O", "B-loc.country"}, {"alpha", "beta"}},
  };
}

ModelDims toy_dims() {
  ModelDims dims;
  dims.word_dim = 4;
  dims.word_hidden = 3;
  dims.attn_dim = 4;
  dims.attn_qk_dim = 3;
  dims.char_dim = 3;
  dims.char_hidden = 2;
  dims.task_hidden = 3;
  dims.d_a = 4;
  dims.d_p = 2;
  dims.d_s = 3;
  dims.d = 3;
  return dims;
}

GradCheckReport toy_model_gradcheck(std::uint64_t seed, double step,
                                    Ablation ablation, int levels) {
  const std::vector<Sample> samples = toy_corpus();
  CorpusIndex index = build_index(samples, levels);
  MiscaModel model = build_model(index, toy_dims(), ablation, seed);
  const auto batches = make_batches(samples, index, 3, std::nullopt);

  TrainConfig config;
  config.lambda = 0.5;
  const int row = 2;  // the two-token multi-intent utterance
  const auto loss_fn = [&](Tape& tape) {
    TokenIds ids = ids_for_batch_row(batches[0], row);
    UtteranceForward fwd = forward_utterance(tape, model, ids);
    return utterance_loss(tape, model, fwd, batches[0], row, config).joint;
  };
  std::vector<Parameter*> params = model.parameters();
  return gradcheck(loss_fn, params, step, 1e-4);
}

GridResult grid_search(const TrainConfig& base,
                       const std::vector<Sample>& train_split,
                       const std::vector<Sample>& val_split,
                       std::ostream* log) {
  static const int kWordDims[] = {64, 128};
  static const double kLambdas[] = {0.1, 0.25, 0.5, 0.75, 0.9};
  GridResult out;
  out.best.best_val_overall = -1.0;
  for (int word_dim : kWordDims) {
    for (double lambda : kLambdas) {
      TrainConfig config = base;
      config.dims.word_dim = word_dim;
      config.lambda = lambda;
      TrainResult run = train(config, train_split, val_split, nullptr);
      out.points.push_back(
          {word_dim, lambda, run.best.best_val_overall});
      if (log) {
        *log << "grid word_dim " << word_dim << " lambda " << lambda
             << " val_overall " << run.best.best_val_overall << "\n";
      }
      if (run.best.best_val_overall > out.best.best_val_overall) {
        out.best = run.best;
      }
    }
  }
  return out;
}

}  // namespace misca
