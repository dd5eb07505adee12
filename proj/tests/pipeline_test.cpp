#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "visaw/checkpoint.hpp"
#include "visaw/errors.hpp"
#include "visaw/pipeline.hpp"

using namespace visaw;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempTree {
  fs::path root;
  TempTree() {
    static int counter = 0;
    root = fs::temp_directory_path() /
           ("pipeline_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
};

RunConfig tiny_cfg(const fs::path& root) {
  RunConfig c;
  c.seed = 5;
  c.d_s = 12;
  c.d_t = 12;
  c.d = 12;
  c.d_img = 16;
  c.regions = 5;
  c.background_regions = 1;
  c.heads = 2;
  c.fusion_heads = 2;
  c.layers = 1;
  c.d_ff = 24;
  c.max_len = 24;
  c.m = 3;
  c.k_plus = 2;
  c.k_minus = 2;
  c.topics = 4;
  c.topic_vocab = 8;
  c.ambig_vocab = 5;
  c.copy_vocab = 6;
  c.n_pairs = 60;
  c.n_heldout = 20;
  c.caption_topic_min = 2;
  c.caption_topic_max = 4;
  c.batch_size = 16;
  c.embed_epochs = 2;
  c.task_epochs = 2;
  c.tag_train = 16;
  c.tag_test = 12;
  c.nli_train = 12;
  c.nli_test = 8;
  c.copy_train = 16;
  c.copy_test = 8;
  c.copy_len_max = 5;
  c.data_dir = (root / "data").string();
  c.out_dir = (root / "out").string();
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file " << path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Metrics lines minus the timestamp, which is allowed to differ.
std::string metrics_fingerprint(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(bool(in), "missing metrics " << path);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    json row = json::parse(line);
    row.erase("ts");
    out << row.dump() << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("the full pipeline runs and is reproducible") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  RunPaths paths{cfg.out_dir};

  GenSummary gen = cmd_gen_data(cfg);
  CHECK(gen.texts == cfg.n_pairs + cfg.n_heldout);
  CHECK(gen.images == gen.texts);
  CHECK(gen.pairs == cfg.n_pairs);
  CHECK(gen.heldout == cfg.n_heldout);

  EmbedSummary emb = cmd_train_embed(cfg);
  REQUIRE(emb.epoch_loss.size() == cfg.embed_epochs);
  CHECK(emb.heldout_recall >= 0.0);
  CHECK(fs::exists(paths.embed_ckpt()));

  CHECK(cmd_build_index(cfg) == cfg.n_pairs);
  CHECK(cmd_retrieve(cfg) == cfg.n_pairs + cfg.n_heldout);

  // Every query gets exactly m rows: the TSV length matches.
  {
    std::ifstream tsv(paths.retrieval_tsv());
    std::size_t lines = 0;
    std::string line;
    while (std::getline(tsv, line)) ++lines;
    CHECK(lines == (cfg.n_pairs + cfg.n_heldout) * cfg.m);
  }

  TaskSummary task = cmd_train_task(cfg);
  REQUIRE(task.epoch_loss.size() == cfg.task_epochs);
  CHECK(fs::exists(paths.task_ckpt("tag")));

  EvalSummary eval = cmd_evaluate(cfg);
  CHECK(eval.metrics.contains("token_accuracy"));
  CHECK(eval.metrics.contains("ambiguous_token_accuracy"));
  CHECK(eval.metrics.contains("span_f1"));
  CHECK(fs::exists(paths.predictions_tsv("tag")));
  CHECK(fs::exists(paths.eval_json("tag")));

  // Re-running every stage reproduces checkpoints, outputs and metrics
  // values; only timestamps may move.
  std::string e1 = slurp(paths.embed_ckpt());
  std::string i1 = slurp(paths.index_ckpt());
  std::string t1 = slurp(paths.task_ckpt("tag"));
  std::string r1 = slurp(paths.retrieval_tsv());
  std::string p1 = slurp(paths.predictions_tsv("tag"));
  std::string m1 = metrics_fingerprint(paths.metrics("train-embed"));
  std::string m2 = metrics_fingerprint(paths.metrics("train-task"));
  std::string m3 = metrics_fingerprint(paths.metrics("evaluate"));

  cmd_train_embed(cfg);
  cmd_build_index(cfg);
  cmd_retrieve(cfg);
  cmd_train_task(cfg);
  cmd_evaluate(cfg);

  CHECK(slurp(paths.embed_ckpt()) == e1);
  CHECK(slurp(paths.index_ckpt()) == i1);
  CHECK(slurp(paths.task_ckpt("tag")) == t1);
  CHECK(slurp(paths.retrieval_tsv()) == r1);
  CHECK(slurp(paths.predictions_tsv("tag")) == p1);
  CHECK(metrics_fingerprint(paths.metrics("train-embed")) == m1);
  CHECK(metrics_fingerprint(paths.metrics("train-task")) == m2);
  CHECK(metrics_fingerprint(paths.metrics("evaluate")) == m3);
}

TEST_CASE("nli and copy tasks train and evaluate") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  cmd_gen_data(cfg);
  cmd_train_embed(cfg);
  cmd_build_index(cfg);

  cfg.task = "nli";
  cmd_train_task(cfg);
  EvalSummary nli = cmd_evaluate(cfg);
  CHECK(nli.metrics.contains("accuracy"));
  double acc = nli.metrics.at("accuracy").get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);

  cfg.task = "copy";
  cfg.m = 0;  // decoder task runs text-only
  cmd_train_task(cfg);
  EvalSummary copy = cmd_evaluate(cfg);
  CHECK(copy.metrics.contains("token_accuracy"));
  CHECK(copy.metrics.contains("sequence_accuracy"));
}

TEST_CASE("evaluate rebuilds the model from the checkpoint snapshot") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  cmd_gen_data(cfg);
  cmd_train_embed(cfg);
  cmd_build_index(cfg);
  cmd_train_task(cfg);

  // The invocation's model hyperparameters are ignored at eval time; only
  // file locations matter. A different m or width cannot skew the result.
  EvalSummary a = cmd_evaluate(cfg);
  RunConfig other = cfg;
  other.m = 0;
  other.d = 48;
  other.heads = 4;
  EvalSummary b = cmd_evaluate(other);
  CHECK(a.metrics == b.metrics);
}

TEST_CASE("visual memory is inactive at m = 0 and shaped otherwise") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  cmd_gen_data(cfg);
  cmd_train_embed(cfg);
  cmd_build_index(cfg);
  Corpus corpus = load_corpus(cfg.data_dir);

  RunConfig off = cfg;
  off.m = 0;
  VisualMemory none = VisualMemory::load(off, corpus);
  CHECK_FALSE(none.active);
  CHECK_FALSE(none.memory_for(corpus.encode(corpus.texts[0].second), corpus).defined());

  VisualMemory vm = VisualMemory::load(cfg, corpus);
  CHECK(vm.active);
  Tensor mem = vm.memory_for(corpus.encode(corpus.texts[0].second), corpus);
  REQUIRE(mem.defined());
  CHECK(mem.shape() == Shape{cfg.m, cfg.d_img});
  CHECK_FALSE(mem.requires_grad());
}

TEST_CASE("stages fail loudly when their inputs are missing") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  CHECK_THROWS_AS(cmd_train_embed(cfg), Error);  // no data yet
  cmd_gen_data(cfg);
  CHECK_THROWS_AS(cmd_build_index(cfg), Error);  // no embedding checkpoint
  CHECK_THROWS_AS(cmd_evaluate(cfg), Error);     // no task checkpoint
  cmd_train_embed(cfg);
  CHECK_THROWS_AS(cmd_retrieve(cfg), Error);     // no index yet
}

TEST_CASE("task checkpoints name their task") {
  TempTree tmp;
  RunConfig cfg = tiny_cfg(tmp.root);
  cmd_gen_data(cfg);
  cmd_train_embed(cfg);
  cmd_build_index(cfg);
  cmd_train_task(cfg);

  LoadedCheckpoint ckpt = load_checkpoint(RunPaths{cfg.out_dir}.task_ckpt("tag"));
  CHECK(ckpt.module == "task-tag");
  RunConfig snap = RunConfig::from_json(ckpt.config);
  CHECK(snap.m == cfg.m);
  CHECK(snap.task == "tag");
}
