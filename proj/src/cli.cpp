#include "misca/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "misca/synthetic.hpp"
#include "misca/training.hpp"

namespace misca {

namespace {

namespace fs = std::filesystem;

struct CliState {
  TrainConfig config;
  std::string config_file;
  std::string checkpoint;
  std::string split = "test";
  std::string out;
  std::string out_dir = "misca-run";
  int utterance = 0;
  bool grid = false;
  double gc_step = 1e-4;
  double gc_tol = 1e-4;
};

void add_config_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_file,
                  "flat key-value config file; flags override its entries");
  cmd->add_option("--dataset-dir", st.config.dataset_dir,
                  "directory holding train.txt, dev.txt, test.txt");
  cmd->add_option("--levels", st.config.levels, "slot hierarchy depth (1 or 2)")
      ->check(CLI::Range(1, 2));
  cmd->add_option("--lambda", st.config.lambda, "intent loss share in (0,1)");
  cmd->add_option("--word-dim", st.config.dims.word_dim, "word embedding size");
  cmd->add_option("--lr", st.config.lr, "initial learning rate");
  cmd->add_option("--epochs", st.config.epochs, "training epochs");
  cmd->add_option("--seed", st.config.seed, "RNG seed");
  cmd->add_option("--ablation", st.config.ablation,
                  "full | no_slot_label_attention | no_coattention");
  cmd->add_flag("--hard-bio", st.config.hard_bio,
                "forbid invalid BIO transitions at decode time");
  cmd->add_option("--batch-size", st.config.batch_size, "batch size");
  cmd->add_option("--clip-norm", st.config.clip_norm,
                  "global gradient norm clip (0 = off)");
  cmd->add_option("--weight-decay", st.config.weight_decay, "AdamW weight decay");
  cmd->add_option("--coarse-label-loss", st.config.coarse_label_loss,
                  "weight of the auxiliary coarse-label BCE (0 = off)");
  cmd->add_option("--word-hidden", st.config.dims.word_hidden,
                  "word BiLSTM hidden size per direction");
  cmd->add_option("--attn-dim", st.config.dims.attn_dim,
                  "self-attention output width");
  cmd->add_option("--attn-qk-dim", st.config.dims.attn_qk_dim,
                  "self-attention query/key width");
  cmd->add_option("--char-dim", st.config.dims.char_dim, "char embedding size");
  cmd->add_option("--char-hidden", st.config.dims.char_hidden,
                  "char BiLSTM hidden size per direction");
  cmd->add_option("--task-hidden", st.config.dims.task_hidden,
                  "task BiLSTM hidden size per direction");
  cmd->add_option("--d-a", st.config.dims.d_a, "label attention width");
  cmd->add_option("--d-p", st.config.dims.d_p, "hierarchy projection width");
  cmd->add_option("--d-s", st.config.dims.d_s, "soft tag embedding width");
  cmd->add_option("--d", st.config.dims.d, "co-attention projection width");
}

// The config file is applied before flag parsing so explicit flags win.
void preload_config_file(const std::vector<std::string>& args, CliState& st) {
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      std::ifstream in(args[i + 1]);
      if (!in) {
        throw std::runtime_error("cannot open config file: " + args[i + 1]);
      }
      st.config = TrainConfig::from_key_values(in);
      return;
    }
  }
}

const std::vector<Sample>& pick_split(const CorpusSplits& splits,
                                      const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "dev") return splits.dev;
  if (name == "test") return splits.test;
  throw std::runtime_error("unknown split '" + name +
                           "' (expected train, dev or test)");
}

void warn_if_degenerate(const CorpusIndex& index) {
  if (index.hierarchy.degenerate) {
    std::cerr << "warning: levels=2 requested but no slot label has a '.' "
                 "prefix; the coarse level equals the fine level\n";
  }
}

struct LoadedModel {
  TrainConfig config;
  CorpusSplits splits;
  CorpusIndex index;
  MiscaModel model;
};

LoadedModel load_model_for_inference(const CliState& st, bool hard_bio_set) {
  if (st.checkpoint.empty()) {
    throw std::runtime_error("--checkpoint is required");
  }
  Checkpoint ckpt = load_checkpoint(st.checkpoint);
  LoadedModel lm{ckpt.config, {}, {}, {}};
  if (!st.config.dataset_dir.empty()) {
    lm.config.dataset_dir = st.config.dataset_dir;
  }
  if (hard_bio_set) lm.config.hard_bio = st.config.hard_bio;
  if (lm.config.dataset_dir.empty()) {
    throw std::runtime_error("no dataset directory (pass --dataset-dir or "
                             "use a checkpoint that records one)");
  }
  lm.splits = load_splits(lm.config.dataset_dir);
  lm.index = build_index(lm.splits.train, lm.config.levels);
  lm.model = build_model(lm.index, lm.config.dims, lm.config.ablation_mode(),
                         lm.config.seed);
  apply_checkpoint(ckpt, lm.model);
  return lm;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << text;
}

int cmd_train(CliState& st) {
  if (st.config.dataset_dir.empty()) {
    throw std::runtime_error("train: --dataset-dir is required");
  }
  CorpusSplits splits = load_splits(st.config.dataset_dir);
  CorpusIndex index = build_index(splits.train, st.config.levels);
  warn_if_degenerate(index);

  fs::create_directories(st.out_dir);
  std::ofstream log(fs::path(st.out_dir) / "train.log");
  if (!log) {
    throw std::runtime_error("cannot write training log under " + st.out_dir);
  }
  write_index_sidecar(fs::path(st.out_dir) / "labels.txt", index);
  write_text_file(fs::path(st.out_dir) / "config.txt",
                  st.config.to_key_values());

  Checkpoint best;
  if (st.grid) {
    GridResult grid = grid_search(st.config, splits.train, splits.dev, &log);
    best = grid.best;
    std::cout << "grid search finished; best word_dim="
              << best.config.dims.word_dim << " lambda=" << best.config.lambda
              << " val_overall=" << best.best_val_overall << "\n";
  } else {
    TrainResult result = train(st.config, splits.train, splits.dev, &log);
    best = result.best;
    std::cout << "training finished; best epoch " << best.best_epoch
              << " val_overall=" << best.best_val_overall << "\n";
  }
  const fs::path ckpt_path = fs::path(st.out_dir) / "checkpoint.ckpt";
  save_checkpoint(ckpt_path, best);
  std::cout << "checkpoint written to " << ckpt_path.string() << "\n";
  return 0;
}

int cmd_eval(CliState& st, bool hard_bio_set) {
  LoadedModel lm = load_model_for_inference(st, hard_bio_set);
  const auto& samples = pick_split(lm.splits, st.split);
  SplitEval ev = evaluate_split(lm.model, samples, lm.config.hard_bio);
  std::cout << report_table(ev.report) << "\n" << report_key_values(ev.report);
  if (!st.out.empty()) {
    std::ostringstream os;
    std::istringstream kv(lm.config.to_key_values());
    std::string line;
    while (std::getline(kv, line)) os << "# " << line << "\n";
    os << "split " << st.split << "\n" << report_key_values(ev.report);
    write_text_file(st.out, os.str());
  }
  return 0;
}

int cmd_predict(CliState& st, bool hard_bio_set) {
  if (st.out.empty()) {
    throw std::runtime_error("predict: --out is required");
  }
  LoadedModel lm = load_model_for_inference(st, hard_bio_set);
  const auto& samples = pick_split(lm.splits, st.split);
  SplitEval ev = evaluate_split(lm.model, samples, lm.config.hard_bio);
  std::ofstream out(st.out);
  if (!out) {
    throw std::runtime_error("cannot write predictions: " + st.out);
  }
  write_predictions(out, samples, ev.predictions);
  // Provenance sidecar; the prediction file itself stays in the plain
  // block format.
  std::ostringstream meta;
  meta << "split " << st.split << "\n" << lm.config.to_key_values();
  write_text_file(st.out + ".meta", meta.str());
  std::cout << "predictions for " << samples.size() << " utterances written to "
            << st.out << "\n";
  return 0;
}

int cmd_gradcheck(CliState& st) {
  GradCheckReport report = toy_model_gradcheck(
      st.config.seed, st.gc_step, st.config.ablation_mode(), st.config.levels);
  std::cout << report.summary(st.gc_tol);
  return report.passed(st.gc_tol) ? 0 : 2;
}

void dump_matrix(std::ostream& os, const std::string& title, const Matrix& m) {
  os << "[" << title << "] " << m.rows << "x" << m.cols << "\n";
  char buf[64];
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.10g", m.at(i, j));
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
}

int cmd_inspect(CliState& st, bool hard_bio_set) {
  if (st.out.empty()) {
    throw std::runtime_error("inspect: --out is required");
  }
  LoadedModel lm = load_model_for_inference(st, hard_bio_set);
  const auto& samples = pick_split(lm.splits, st.split);
  if (st.utterance < 0 || st.utterance >= static_cast<int>(samples.size())) {
    throw std::runtime_error("inspect: utterance index " +
                             std::to_string(st.utterance) + " outside split '" +
                             st.split + "' with " +
                             std::to_string(samples.size()) + " utterances");
  }
  if (lm.model.chain_length() == 0) {
    throw std::runtime_error(
        "inspect: the no_coattention ablation has no co-attention stack");
  }
  const Sample& sample = samples[static_cast<size_t>(st.utterance)];
  Tape tape;
  UtteranceForward fwd =
      forward_utterance(tape, lm.model, ids_for_sample(sample, lm.index.vocab));

  std::ostringstream os;
  os << "# misca inspect\n";
  std::istringstream kv(lm.config.to_key_values());
  std::string line;
  while (std::getline(kv, line)) os << "# " << line << "\n";
  os << "split " << st.split << "\nutterance " << st.utterance << "\ntokens";
  for (const auto& t : sample.tokens) os << ' ' << t;
  os << "\nlayers " << fwd.stack.size() << "\n";
  for (int t = 0; t < fwd.stack.size(); ++t) {
    dump_matrix(os, "layer " + std::to_string(t + 1),
                tape.val(fwd.stack.layers[static_cast<size_t>(t)]));
  }
  for (size_t t = 0; t < fwd.stack.corr.size(); ++t) {
    dump_matrix(os,
                "bilinear " + std::to_string(t + 1) + ":" + std::to_string(t + 2),
                tape.val(fwd.stack.corr[t]));
  }
  for (size_t t = 0; t + 1 < fwd.chains.h_bwd.size(); ++t) {
    dump_matrix(os, "back " + std::to_string(t + 1),
                tape.val(fwd.chains.h_bwd[t]));
  }
  for (size_t t = 1; t < fwd.chains.h_fwd.size(); ++t) {
    dump_matrix(os, "fwd " + std::to_string(t + 1),
                tape.val(fwd.chains.h_fwd[t]));
  }
  write_text_file(st.out, os.str());
  std::cout << "co-attention dump written to " << st.out << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CliState st;
  CLI::App app{"misca: joint multi-intent detection and slot filling"};
  app.require_subcommand(1);

  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and keep the best checkpoint");
  add_config_options(train_cmd, st);
  train_cmd->add_option("--out-dir", st.out_dir,
                        "directory for checkpoint, log and label sidecar");
  train_cmd->add_flag("--grid", st.grid,
                      "grid search over word_dim x lambda");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_config_options(eval_cmd, st);
  eval_cmd->add_option("--checkpoint", st.checkpoint, "checkpoint file");
  eval_cmd->add_option("--split", st.split, "train | dev | test");
  eval_cmd->add_option("--out", st.out, "write the key-value report here");

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "write predictions for a split");
  add_config_options(predict_cmd, st);
  predict_cmd->add_option("--checkpoint", st.checkpoint, "checkpoint file");
  predict_cmd->add_option("--split", st.split, "train | dev | test");
  predict_cmd->add_option("--out", st.out, "prediction output file");

  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference gradient check on a tiny model");
  add_config_options(gradcheck_cmd, st);
  gradcheck_cmd->add_option("--step", st.gc_step, "finite-difference step");
  gradcheck_cmd->add_option("--tol", st.gc_tol, "max relative error allowed");

  CLI::App* inspect_cmd = app.add_subcommand(
      "inspect", "dump co-attention internals for one utterance");
  add_config_options(inspect_cmd, st);
  inspect_cmd->add_option("--checkpoint", st.checkpoint, "checkpoint file");
  inspect_cmd->add_option("--split", st.split, "train | dev | test");
  inspect_cmd->add_option("--utterance", st.utterance, "utterance index");
  inspect_cmd->add_option("--out", st.out, "dump output file");

  try {
    preload_config_file(args, st);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (train_cmd->parsed()) return cmd_train(st);
    if (eval_cmd->parsed()) {
      return cmd_eval(st, eval_cmd->count("--hard-bio") > 0);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(st, predict_cmd->count("--hard-bio") > 0);
    }
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(st);
    if (inspect_cmd->parsed()) {
      return cmd_inspect(st, inspect_cmd->count("--hard-bio") > 0);
    }
    throw std::runtime_error("no subcommand selected");
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace misca
