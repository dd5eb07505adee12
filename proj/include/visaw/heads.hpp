#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visaw/fusion.hpp"
#include "visaw/params.hpp"
#include "visaw/tensor.hpp"

namespace visaw {

// Per-token affine + softmax over the tag set.
struct TagHeadParams {
  Tensor w, b;  // [d x tags], [tags]

  static TagHeadParams init(std::size_t d, std::size_t tags, std::uint64_t seed,
                            const std::string& prefix = "tag");
  ParamList params(const std::string& prefix = "tag");
};

Tensor tag_logits(const Tensor& fused, const TagHeadParams& p);  // [len x tags]
Tensor tag_distribution(const Tensor& fused, const TagHeadParams& p);

// Sentence-pair classifier over mean-pooled fused states h_p and h_h with
// the feature vector [h_p; h_h; |h_p - h_h|; h_p * h_h].
struct PairHeadParams {
  Tensor w, b;  // [4d x classes], [classes]

  static PairHeadParams init(std::size_t d, std::size_t classes, std::uint64_t seed,
                             const std::string& prefix = "pair");
  ParamList params(const std::string& prefix = "pair");
};

Tensor pair_feature(const Tensor& fused_premise, const Tensor& fused_hypothesis);  // [4d]
Tensor pair_logits(const Tensor& fused_premise, const Tensor& fused_hypothesis,
                   const PairHeadParams& p);  // [1 x classes]
Tensor classify_pair(const Tensor& fused_premise, const Tensor& fused_hypothesis,
                     const PairHeadParams& p);  // [classes] probabilities

// Single-block decoder: causal self-attention over the generated prefix,
// cross-attention onto the fused source states, feed-forward, all post-norm,
// then a projection onto the output vocabulary.
struct DecoderParams {
  Tensor token_table;  // [vocab x d]
  Tensor pos_table;    // [max_len x d]
  AttentionParams self_attn;
  Tensor ln1_g, ln1_b;
  AttentionParams cross_attn;
  Tensor ln2_g, ln2_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln3_g, ln3_b;
  Tensor out_w, out_b;  // [d x vocab], [vocab]
  std::size_t max_len = 64;
  double ln_eps = 1e-6;

  static DecoderParams init(std::size_t vocab, std::size_t d, std::size_t heads,
                            std::size_t d_ff, std::size_t max_len, std::uint64_t seed,
                            const std::string& prefix = "dec");
  ParamList params(const std::string& prefix = "dec");
};

// Teacher-forced pass: logits[t] predicts the token following prefix[0..t].
Tensor decoder_logits(const std::vector<std::size_t>& prefix, const Tensor& fused_source,
                      const DecoderParams& p);

struct DecodeResult {
  std::vector<std::size_t> tokens;  // without BOS/EOS
  bool truncated = false;           // hit max_len before EOS
};

// Greedy argmax decode from BOS until EOS or max_len; ties take the lowest
// token id.
DecodeResult greedy_decode(const Tensor& fused_source, const DecoderParams& p,
                           std::size_t bos_id, std::size_t eos_id, std::size_t max_len);

}  // namespace visaw
