#include "visaw/config.hpp"

#include <fstream>
#include <set>

#include "visaw/errors.hpp"

namespace visaw {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  try {
    out = v.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Config, std::string("config: key \"") + key + "\" has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::Config, "config: top level must be a JSON object");

  static const std::set<std::string> known = {
      "seed",          "d_s",           "d_t",
      "d",             "d_img",         "regions",
      "heads",         "fusion_heads",  "layers",
      "d_ff",          "max_len",       "ln_eps",
      "alpha",         "symmetric_triplet", "k_plus",
      "k_minus",       "weldon_beta",   "m",
      "lr",            "adam_beta1",    "adam_beta2",
      "adam_eps",      "batch_size",    "embed_epochs",
      "task_epochs",   "task",          "data_dir",
      "out_dir",       "topics",        "topic_vocab",
      "ambig_vocab",   "copy_vocab",    "n_pairs",
      "n_heldout",     "caption_topic_min", "caption_topic_max",
      "caption_ambig_min", "caption_ambig_max", "attr_scale",
      "signal_noise",  "background_regions", "background_noise",
      "tag_train",     "tag_test",      "nli_train",
      "nli_test",      "copy_train",    "copy_test",
      "copy_len_max"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) fail(ErrorKind::Config, "config: unknown key \"" + key + "\"");
  }

  RunConfig c;
  read_field(doc, "seed", c.seed);
  read_field(doc, "d_s", c.d_s);
  read_field(doc, "d_t", c.d_t);
  read_field(doc, "d", c.d);
  read_field(doc, "d_img", c.d_img);
  read_field(doc, "regions", c.regions);
  read_field(doc, "heads", c.heads);
  read_field(doc, "fusion_heads", c.fusion_heads);
  read_field(doc, "layers", c.layers);
  read_field(doc, "d_ff", c.d_ff);
  read_field(doc, "max_len", c.max_len);
  read_field(doc, "ln_eps", c.ln_eps);
  read_field(doc, "alpha", c.alpha);
  read_field(doc, "symmetric_triplet", c.symmetric_triplet);
  read_field(doc, "k_plus", c.k_plus);
  read_field(doc, "k_minus", c.k_minus);
  read_field(doc, "weldon_beta", c.weldon_beta);
  read_field(doc, "m", c.m);
  read_field(doc, "lr", c.lr);
  read_field(doc, "adam_beta1", c.adam_beta1);
  read_field(doc, "adam_beta2", c.adam_beta2);
  read_field(doc, "adam_eps", c.adam_eps);
  read_field(doc, "batch_size", c.batch_size);
  read_field(doc, "embed_epochs", c.embed_epochs);
  read_field(doc, "task_epochs", c.task_epochs);
  read_field(doc, "task", c.task);
  read_field(doc, "data_dir", c.data_dir);
  read_field(doc, "out_dir", c.out_dir);
  read_field(doc, "topics", c.topics);
  read_field(doc, "topic_vocab", c.topic_vocab);
  read_field(doc, "ambig_vocab", c.ambig_vocab);
  read_field(doc, "copy_vocab", c.copy_vocab);
  read_field(doc, "n_pairs", c.n_pairs);
  read_field(doc, "n_heldout", c.n_heldout);
  read_field(doc, "caption_topic_min", c.caption_topic_min);
  read_field(doc, "caption_topic_max", c.caption_topic_max);
  read_field(doc, "caption_ambig_min", c.caption_ambig_min);
  read_field(doc, "caption_ambig_max", c.caption_ambig_max);
  read_field(doc, "attr_scale", c.attr_scale);
  read_field(doc, "signal_noise", c.signal_noise);
  read_field(doc, "background_regions", c.background_regions);
  read_field(doc, "background_noise", c.background_noise);
  read_field(doc, "tag_train", c.tag_train);
  read_field(doc, "tag_test", c.tag_test);
  read_field(doc, "nli_train", c.nli_train);
  read_field(doc, "nli_test", c.nli_test);
  read_field(doc, "copy_train", c.copy_train);
  read_field(doc, "copy_test", c.copy_test);
  read_field(doc, "copy_len_max", c.copy_len_max);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "config: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, "config: " + path + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"seed", seed},
      {"d_s", d_s},
      {"d_t", d_t},
      {"d", d},
      {"d_img", d_img},
      {"regions", regions},
      {"heads", heads},
      {"fusion_heads", fusion_heads},
      {"layers", layers},
      {"d_ff", d_ff},
      {"max_len", max_len},
      {"ln_eps", ln_eps},
      {"alpha", alpha},
      {"symmetric_triplet", symmetric_triplet},
      {"k_plus", k_plus},
      {"k_minus", k_minus},
      {"weldon_beta", weldon_beta},
      {"m", m},
      {"lr", lr},
      {"adam_beta1", adam_beta1},
      {"adam_beta2", adam_beta2},
      {"adam_eps", adam_eps},
      {"batch_size", batch_size},
      {"embed_epochs", embed_epochs},
      {"task_epochs", task_epochs},
      {"task", task},
      {"data_dir", data_dir},
      {"out_dir", out_dir},
      {"topics", topics},
      {"topic_vocab", topic_vocab},
      {"ambig_vocab", ambig_vocab},
      {"copy_vocab", copy_vocab},
      {"n_pairs", n_pairs},
      {"n_heldout", n_heldout},
      {"caption_topic_min", caption_topic_min},
      {"caption_topic_max", caption_topic_max},
      {"caption_ambig_min", caption_ambig_min},
      {"caption_ambig_max", caption_ambig_max},
      {"attr_scale", attr_scale},
      {"signal_noise", signal_noise},
      {"background_regions", background_regions},
      {"background_noise", background_noise},
      {"tag_train", tag_train},
      {"tag_test", tag_test},
      {"nli_train", nli_train},
      {"nli_test", nli_test},
      {"copy_train", copy_train},
      {"copy_test", copy_test},
      {"copy_len_max", copy_len_max}};
}

void RunConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(ErrorKind::Config, std::string("config: ") + name + " must be positive");
  };
  positive(d_s, "d_s");
  positive(d_t, "d_t");
  positive(d, "d");
  positive(d_img, "d_img");
  positive(regions, "regions");
  positive(heads, "heads");
  positive(fusion_heads, "fusion_heads");
  positive(layers, "layers");
  positive(d_ff, "d_ff");
  positive(max_len, "max_len");
  positive(batch_size, "batch_size");
  if (d % heads != 0) fail(ErrorKind::Config, "config: d must be divisible by heads");
  if (d % fusion_heads != 0) {
    fail(ErrorKind::Config, "config: d must be divisible by fusion_heads");
  }
  if (alpha < 0.0) fail(ErrorKind::Config, "config: alpha must be non-negative");
  if (ln_eps < 0.0) fail(ErrorKind::Config, "config: ln_eps must be non-negative");
  if (k_plus < 1) fail(ErrorKind::Config, "config: k_plus must be at least 1");
  if (k_plus + k_minus > regions) {
    fail(ErrorKind::Config, "config: k_plus + k_minus exceeds regions");
  }
  if (!(lr > 0.0)) fail(ErrorKind::Config, "config: lr must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    fail(ErrorKind::Config, "config: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail(ErrorKind::Config, "config: adam_eps must be positive");
  if (task != "tag" && task != "nli" && task != "copy") {
    fail(ErrorKind::Config, "config: task must be one of tag, nli, copy");
  }
  if (topics < 4) fail(ErrorKind::Config, "config: topics must be at least 4");
  positive(topic_vocab, "topic_vocab");
  positive(ambig_vocab, "ambig_vocab");
  positive(copy_vocab, "copy_vocab");
  if (caption_topic_min < 1 || caption_topic_min > caption_topic_max) {
    fail(ErrorKind::Config, "config: caption_topic_min/max are inconsistent");
  }
  // Task sentences draw topic words from one half of a topic's
  // sub-vocabulary, so a caption must fit inside a half.
  if (caption_topic_max > topic_vocab / 2) {
    fail(ErrorKind::Config, "config: caption_topic_max exceeds topic_vocab / 2");
  }
  if (caption_ambig_min > caption_ambig_max || caption_ambig_max > ambig_vocab) {
    fail(ErrorKind::Config, "config: caption_ambig_min/max are inconsistent");
  }
  if (background_regions >= regions) {
    fail(ErrorKind::Config, "config: background_regions must leave at least one signal region");
  }
  if (copy_len_max < 1 || copy_len_max + 2 > max_len) {
    fail(ErrorKind::Config, "config: copy_len_max must fit within max_len with BOS/EOS");
  }
}

}  // namespace visaw
