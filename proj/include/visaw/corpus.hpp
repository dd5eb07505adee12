#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "visaw/config.hpp"
#include "visaw/tensor.hpp"

namespace visaw {

struct Vocab {
  std::vector<std::string> tokens;  // position is the id
  std::unordered_map<std::string, std::size_t> ids;

  static constexpr std::size_t kBos = 0;
  static constexpr std::size_t kEos = 1;

  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;  // vocabulary error when absent
  std::size_t size() const { return tokens.size(); }
};

struct TagExample {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct PairExample {
  std::string id;
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  std::string label;  // entailment | neutral | contradiction
};

struct SeqExample {
  std::string id;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// Pre-tokenized corpus plus task splits, as written by gen-data. Pair lists
// reference texts/images by id; the loader verifies every reference.
struct Corpus {
  Vocab vocab;
  std::vector<std::pair<std::string, std::vector<std::string>>> texts;
  std::vector<std::pair<std::string, Tensor>> images;  // [R x d_img] each
  std::vector<std::pair<std::string, std::string>> pairs;          // training
  std::vector<std::pair<std::string, std::string>> heldout_pairs;  // evaluation only
  std::vector<TagExample> tag_train, tag_test;
  std::vector<PairExample> nli_train, nli_test;
  std::vector<SeqExample> copy_train, copy_test;

  std::unordered_map<std::string, std::size_t> text_pos, image_pos;

  void reindex();  // rebuilds text_pos/image_pos
  const std::vector<std::string>& text(const std::string& id) const;
  const Tensor& image(const std::string& id) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& toks) const;
};

// Synthetic data: `topics` latent topics, each owning a word sub-vocabulary
// and a Gaussian cluster in image-feature space. Captions mix topic words
// (which carry image-space attribute vectors) with shared ambiguous words
// (which carry none). Tag/pair task sentences draw topic words from the
// first half of each topic's vocabulary for training and the second half
// for test, so the task-time text alone cannot reveal the topic of an
// unseen-word sentence, while the retrieval corpus covers both halves.
// Ambiguous-word gold tags name the sentence topic.
Corpus generate_corpus(const RunConfig& cfg);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

std::string topic_tag(std::size_t topic);  // "T<k>"

}  // namespace visaw
