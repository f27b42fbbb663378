#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "misca/metrics.hpp"
#include "misca/model.hpp"

namespace misca {

struct TrainConfig {
  std::string dataset_dir;
  int levels = 1;
  ModelDims dims;
  std::string ablation = "full";

  double lambda = 0.5;  // intent loss share; (1 - lambda) goes to slots
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;              // 0 disables gradient clipping
  double coarse_label_loss = 0.0;      // aux BCE on hierarchy probabilities
  bool hard_bio = false;               // forbid invalid BIO moves at decode

  Ablation ablation_mode() const { return ablation_from_string(ablation); }

  // Flat key-value round trip (one "key value" per line).
  std::string to_key_values() const;
  static TrainConfig from_key_values(std::istream& in);
  void set_field(const std::string& key, const std::string& value);
};

// L = lambda * (intent_bce + count_ce) + (1 - lambda) * slot_nll
Value joint_loss(Tape& tape, Value intent_bce, Value count_ce, Value slot_nll,
                 double lambda);

struct UtteranceLoss {
  Value intent_bce;
  Value count_ce;
  Value slot_nll;
  Value joint;
};

// Loss of one batch row; lambda and the optional coarse-label term come
// from the config.
UtteranceLoss utterance_loss(Tape& tape, MiscaModel& model,
                             const UtteranceForward& fwd, const Batch& batch,
                             int row, const TrainConfig& config);

// AdamW with decoupled weight decay; slot state is kept per parameter in
// census order.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, const TrainConfig& config);
  void step();  // consumes current grads, then resets them
  int steps_taken() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_, weight_decay_, clip_norm_;
  int t_ = 0;
};

struct EvalScores {
  double intent_accuracy = 0.0;
  double slot_f1 = 0.0;
  double overall_accuracy = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  EvalScores val;
};

struct Checkpoint {
  TrainConfig config;
  std::vector<std::pair<std::string, Matrix>> tensors;  // census order
  int best_epoch = 0;
  double best_val_overall = 0.0;
};

Checkpoint snapshot(const MiscaModel& model, const TrainConfig& config);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Copies tensors into the model; a missing tensor or shape mismatch throws,
// naming the first offending tensor.
void apply_checkpoint(const Checkpoint& ckpt, MiscaModel& model);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Abort guard used inside the batch loop: a non-finite loss raises
// TrainingError carrying the batch id and the largest parameter norms.
void ensure_finite_loss(double loss_value, int epoch, long batch_index,
                        const MiscaModel& model);

// Full training loop: AdamW on shuffled batches, validation after every
// epoch, best checkpoint by validation overall accuracy (earliest epoch on
// ties). `log` gets one line per epoch when given.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_split,
                  const std::vector<Sample>& val_split,
                  std::ostream* log = nullptr);

// Predictions plus metrics for a frozen model on one split.
struct SplitEval {
  EvalReport report;
  std::vector<DecodedPrediction> predictions;
};

SplitEval evaluate_split(MiscaModel& model, const std::vector<Sample>& samples,
                         bool hard_bio);

// One prediction block per utterance: "token<TAB>gold<TAB>pred" lines, then
// "INTENTS gold=a#b pred=c#d", blank-line separated.
void write_predictions(std::ostream& out, const std::vector<Sample>& samples,
                       const std::vector<DecodedPrediction>& predictions);

// Sequential sweep over word_dim in {64, 128} and lambda in {0.1, 0.25,
// 0.5, 0.75, 0.9}; returns the row list and the best run's checkpoint.
struct GridPoint {
  int word_dim = 0;
  double lambda = 0.0;
  double val_overall = 0.0;
};

struct GridResult {
  std::vector<GridPoint> points;
  Checkpoint best;
};

GridResult grid_search(const TrainConfig& base,
                       const std::vector<Sample>& train_split,
                       const std::vector<Sample>& val_split,
                       std::ostream* log = nullptr);

// Tiny fixture: two intents, three fine slot labels under two coarse
// prefixes, with one two-token multi-intent utterance.
std::vector<Sample> toy_corpus();
ModelDims toy_dims();

// End-to-end finite-difference check of the whole model on the fixture's
// multi-intent utterance (joint loss, lambda = 0.5).
GradCheckReport toy_model_gradcheck(std::uint64_t seed, double step = 1e-4,
                                    Ablation ablation = Ablation::kFull,
                                    int levels = 2);

}  // namespace misca
