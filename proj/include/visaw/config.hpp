#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace visaw {

// One flat JSON document drives every pipeline stage. Unknown keys are
// rejected so a typo cannot silently fall back to a default.
struct RunConfig {
  std::uint64_t seed = 0;

  // widths
  std::size_t d_s = 64;     // shared embedding space
  std::size_t d_t = 64;     // text recurrence width
  std::size_t d = 64;       // encoder/fusion width
  std::size_t d_img = 128;  // image region feature width
  std::size_t regions = 16; // region rows per image
  std::size_t heads = 4;
  std::size_t fusion_heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 256;
  std::size_t max_len = 64;
  double ln_eps = 1e-6;

  // embedding objective and pooling
  double alpha = 0.2;
  bool symmetric_triplet = false;
  std::size_t k_plus = 3;
  std::size_t k_minus = 3;
  double weldon_beta = 1.0;

  // retrieval
  std::size_t m = 8;

  // optimizer
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // training
  std::size_t batch_size = 32;
  std::size_t embed_epochs = 10;
  std::size_t task_epochs = 10;
  std::string task = "tag";  // tag | nli | copy

  // locations
  std::string data_dir = "data";
  std::string out_dir = "out";

  // synthetic corpus
  std::size_t topics = 10;
  std::size_t topic_vocab = 30;  // words per topic
  std::size_t ambig_vocab = 20;
  std::size_t copy_vocab = 20;
  std::size_t n_pairs = 2000;
  std::size_t n_heldout = 500;
  std::size_t caption_topic_min = 4;
  std::size_t caption_topic_max = 7;
  std::size_t caption_ambig_min = 1;
  std::size_t caption_ambig_max = 2;
  double attr_scale = 1.0;
  double signal_noise = 0.1;
  std::size_t background_regions = 4;
  double background_noise = 1.0;
  std::size_t tag_train = 400;
  std::size_t tag_test = 300;
  std::size_t nli_train = 450;
  std::size_t nli_test = 300;
  std::size_t copy_train = 1500;
  std::size_t copy_test = 300;
  std::size_t copy_len_max = 10;

  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

}  // namespace visaw
