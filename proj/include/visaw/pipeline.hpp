#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "visaw/config.hpp"
#include "visaw/corpus.hpp"
#include "visaw/embedding.hpp"
#include "visaw/fusion.hpp"
#include "visaw/gradcheck.hpp"
#include "visaw/heads.hpp"
#include "visaw/retrieval.hpp"

namespace visaw {

// Artifact locations for one run, all under cfg.out_dir.
struct RunPaths {
  std::string out_dir;

  std::string embed_ckpt() const { return out_dir + "/embedding.ckpt"; }
  std::string index_ckpt() const { return out_dir + "/index.ckpt"; }
  std::string task_ckpt(const std::string& task) const {
    return out_dir + "/task_" + task + ".ckpt";
  }
  std::string metrics(const std::string& stage) const {
    return out_dir + "/" + stage + "_metrics.jsonl";
  }
  std::string retrieval_tsv() const { return out_dir + "/retrieval.tsv"; }
  std::string predictions_tsv(const std::string& task) const {
    return out_dir + "/" + task + "_predictions.tsv";
  }
  std::string eval_json(const std::string& task) const {
    return out_dir + "/" + task + "_eval.json";
  }
};

// Tag label inventory: "O" plus one topic tag per latent topic, in topic
// order. Shared by training and evaluation so label ids line up.
std::vector<std::string> tag_label_set(std::size_t topics);
const std::vector<std::string>& nli_label_set();

// Frozen retrieval side used during task training and evaluation: the
// trained text encoder answers queries against the image index, and each
// hit contributes its pooled region vector (the image path's
// pre-projection features) as one constant memory row.
struct VisualMemory {
  bool active = false;
  std::size_t m = 0;
  std::size_t max_len = 64;
  TextPathParams text;
  WeldonConfig pool;
  ImageIndex index;

  // Loads the embedding and index checkpoints; inactive when m == 0.
  static VisualMemory load(const RunConfig& cfg, const Corpus& corpus);

  // [hits x d_img] constant rows for one sentence, or an undefined tensor
  // when inactive. Never builds graph state.
  Tensor memory_for(const std::vector<std::size_t>& token_ids, const Corpus& corpus) const;
};

// Trainable task-side model: encoder, image projection and fusion always;
// exactly one head depending on the task.
struct TaskModel {
  std::string task;  // tag | nli | copy
  EncoderParams enc;
  ImageProjParams img;
  FusionParams fusion;
  TagHeadParams tag;
  PairHeadParams pair;
  DecoderParams dec;

  static TaskModel init(const RunConfig& cfg, std::size_t vocab);
  ParamList params();

  // Encoder + fusion over one sentence; `memory` may be undefined.
  Tensor fused_states(const std::vector<std::size_t>& token_ids, const Tensor& memory);
};

struct GenSummary {
  std::size_t texts = 0, images = 0, pairs = 0, heldout = 0;
};
GenSummary cmd_gen_data(const RunConfig& cfg);

struct EmbedSummary {
  std::vector<double> epoch_loss;
  double heldout_recall = 0.0;
};
EmbedSummary cmd_train_embed(const RunConfig& cfg);

std::size_t cmd_build_index(const RunConfig& cfg);  // returns indexed image count
std::size_t cmd_retrieve(const RunConfig& cfg);     // returns query count

struct TaskSummary {
  std::vector<double> epoch_loss;
};
TaskSummary cmd_train_task(const RunConfig& cfg);

// Evaluation reconstructs the model from the task checkpoint's config
// snapshot (including its m), reading only file locations from `cfg`.
struct EvalSummary {
  nlohmann::json metrics;
};
EvalSummary cmd_evaluate(const RunConfig& cfg);

struct GradcheckSummary {
  std::vector<GradCheckReport> reports;
  double max_rel_err = 0.0;
  bool pass = false;
};
GradcheckSummary cmd_gradcheck(const RunConfig& cfg);

}  // namespace visaw
