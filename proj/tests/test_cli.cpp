#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "misca/cli.hpp"
#include "misca/corpus.hpp"
#include "misca/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return (sub.empty() ? path : path / sub).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Small model flags shared by the CLI smoke runs.
std::vector<std::string> tiny_flags() {
  return {"--word-dim",  "8", "--word-hidden", "6", "--attn-dim",    "8",
          "--attn-qk-dim", "4", "--char-dim",  "4", "--char-hidden", "4",
          "--task-hidden", "6", "--d-a",       "8", "--d-p",         "3",
          "--d-s",         "6", "--d",         "6"};
}

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  auto extra = tiny_flags();
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("cli trains, evaluates, predicts and inspects") {
  TempDir dir("misca_cli_test");
  misca::SyntheticSpec spec;
  spec.train_count = 10;
  spec.val_count = 4;
  spec.test_count = 4;
  misca::write_synthetic_corpus(dir.path / "data", spec);

  const std::string run_dir = dir.str("run");
  int rc = misca::run_cli(with_tiny({"train", "--dataset-dir",
                                     dir.str("data"), "--levels", "2",
                                     "--epochs", "2", "--seed", "3",
                                     "--out-dir", run_dir}));
  REQUIRE(rc == 0);
  CHECK(fs::exists(fs::path(run_dir) / "checkpoint.ckpt"));
  CHECK(fs::exists(fs::path(run_dir) / "labels.txt"));
  const std::string log = slurp(fs::path(run_dir) / "train.log");
  CHECK(log.find("# ablation full") != std::string::npos);
  CHECK(log.find("# parameters ") != std::string::npos);
  CHECK(log.find("epoch 1 train_loss") != std::string::npos);
  CHECK(log.find("epoch 2 train_loss") != std::string::npos);

  const std::string ckpt = run_dir + "/checkpoint.ckpt";
  SUBCASE("eval is deterministic and writes a report") {
    const std::string out_a = dir.str("eval_a.txt");
    const std::string out_b = dir.str("eval_b.txt");
    CHECK(misca::run_cli({"eval", "--checkpoint", ckpt, "--split", "dev",
                          "--out", out_a}) == 0);
    CHECK(misca::run_cli({"eval", "--checkpoint", ckpt, "--split", "dev",
                          "--out", out_b}) == 0);
    CHECK(slurp(out_a) == slurp(out_b));
    CHECK(slurp(out_a).find("overall_accuracy") != std::string::npos);
  }

  SUBCASE("predict writes blocks plus a provenance sidecar") {
    const std::string out = dir.str("pred.txt");
    CHECK(misca::run_cli({"predict", "--checkpoint", ckpt, "--split", "test",
                          "--out", out}) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("INTENTS gold=") != std::string::npos);
    CHECK(text.find('\t') != std::string::npos);
    CHECK(fs::exists(out + ".meta"));

    // Deterministic across runs.
    const std::string out2 = dir.str("pred2.txt");
    CHECK(misca::run_cli({"predict", "--checkpoint", ckpt, "--split", "test",
                          "--out", out2}) == 0);
    CHECK(text == slurp(out2));
  }

  SUBCASE("inspect dumps the co-attention internals") {
    const std::string out = dir.str("dump.txt");
    CHECK(misca::run_cli({"inspect", "--checkpoint", ckpt, "--split", "dev",
                          "--utterance", "1", "--out", out}) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("layers 4") != std::string::npos);
    CHECK(text.find("[bilinear 1:2]") != std::string::npos);
    CHECK(text.find("[back 1]") != std::string::npos);
    CHECK(text.find("[fwd 4]") != std::string::npos);
  }

  SUBCASE("hard BIO flag is accepted at decode time") {
    const std::string out = dir.str("pred_hard.txt");
    CHECK(misca::run_cli({"predict", "--checkpoint", ckpt, "--split", "test",
                          "--hard-bio", "--out", out}) == 0);
  }
}

TEST_CASE("eval reaches perfect scores on a learnable fixture") {
  TempDir dir("misca_cli_perfect");
  // Single intent, one trivially learnable slot.
  std::vector<misca::Sample> train = {
      {{"hi", "there"}, {"O", "O"}, {"greet"}},
      {{"go", "paris"}, {"O", "B-place"}, {"greet"}},
      {{"go", "hanoi"}, {"O", "B-place"}, {"greet"}},
      {{"hi", "paris"}, {"O", "B-place"}, {"greet"}},
  };
  fs::create_directories(dir.path / "data");
  misca::write_corpus(dir.path / "data" / "train.txt", train);
  misca::write_corpus(dir.path / "data" / "dev.txt", train);
  misca::write_corpus(dir.path / "data" / "test.txt",
                      {{{"go", "paris"}, {"O", "B-place"}, {"greet"}},
                       {{"hi", "there"}, {"O", "O"}, {"greet"}}});

  const std::string run_dir = dir.str("run");
  REQUIRE(misca::run_cli(with_tiny(
              {"train", "--dataset-dir", dir.str("data"), "--levels", "1",
               "--epochs", "120", "--seed", "1", "--lambda", "0.3",
               "--lr", "3e-3", "--batch-size", "2", "--out-dir",
               run_dir})) == 0);

  const std::string out = dir.str("eval.txt");
  REQUIRE(misca::run_cli({"eval", "--checkpoint", run_dir + "/checkpoint.ckpt",
                          "--split", "test", "--out", out}) == 0);
  const std::string report = slurp(out);
  CHECK(report.find("overall_accuracy 1\n") != std::string::npos);
  CHECK(report.find("intent_accuracy 1\n") != std::string::npos);
}

TEST_CASE("cli rejects bad invocations") {
  CHECK(misca::run_cli({"frobnicate"}) != 0);
  CHECK(misca::run_cli({"train", "--no-such-flag"}) != 0);
  CHECK(misca::run_cli({"train"}) != 0);  // missing dataset dir
  CHECK(misca::run_cli({"eval"}) != 0);   // missing checkpoint
  CHECK(misca::run_cli({"eval", "--checkpoint", "/nonexistent.ckpt"}) != 0);
  CHECK(misca::run_cli({"predict", "--checkpoint", "x", "--split", "test"}) !=
        0);  // missing --out
  CHECK(misca::run_cli({"train", "--dataset-dir", "/nonexistent-dir"}) != 0);
}

TEST_CASE("gradcheck subcommand reports success") {
  CHECK(misca::run_cli({"gradcheck", "--seed", "7"}) == 0);
}

TEST_CASE("config files feed defaults that flags override") {
  TempDir dir("misca_cli_config");
  misca::SyntheticSpec spec;
  spec.train_count = 8;
  spec.val_count = 3;
  spec.test_count = 3;
  misca::write_synthetic_corpus(dir.path / "data", spec);

  std::ofstream config(dir.path / "misca.conf");
  config << "dataset_dir " << dir.str("data") << "\n";
  config << "levels 2\nepochs 1\nseed 5\n";
  config << "word_dim 8\nword_hidden 6\nattn_dim 8\nattn_qk_dim 4\n";
  config << "char_dim 4\nchar_hidden 4\ntask_hidden 6\nd_a 8\nd_p 3\n";
  config << "d_s 6\nd 6\nlambda 0.25\n";
  config.close();

  const std::string run_dir = dir.str("run");
  REQUIRE(misca::run_cli({"train", "--config", dir.str("misca.conf"),
                          "--lambda", "0.75", "--out-dir", run_dir}) == 0);
  const std::string effective = slurp(fs::path(run_dir) / "config.txt");
  CHECK(effective.find("lambda 0.75") != std::string::npos);  // flag wins
  CHECK(effective.find("levels 2") != std::string::npos);     // file value
}
