#include "visaw/heads.hpp"

#include <numeric>

#include "visaw/errors.hpp"
#include "visaw/ops.hpp"

namespace visaw {

TagHeadParams TagHeadParams::init(std::size_t d, std::size_t tags, std::uint64_t seed,
                                  const std::string& prefix) {
  TagHeadParams p;
  p.w = xavier_uniform({d, tags}, seed, prefix + ".w");
  p.b = zeros_param({tags});
  return p;
}

ParamList TagHeadParams::params(const std::string& prefix) {
  return {{prefix + ".w", w}, {prefix + ".b", b}};
}

Tensor tag_logits(const Tensor& fused, const TagHeadParams& p) {
  if (fused.rank() != 2 || fused.dim(1) != p.w.dim(0)) {
    fail(ErrorKind::Dimension, "tag_logits: fused states " + shape_str(fused.shape()) +
                                   " do not match head " + shape_str(p.w.shape()));
  }
  return add(matmul(fused, p.w), p.b);
}

Tensor tag_distribution(const Tensor& fused, const TagHeadParams& p) {
  return softmax(tag_logits(fused, p));
}

PairHeadParams PairHeadParams::init(std::size_t d, std::size_t classes, std::uint64_t seed,
                                    const std::string& prefix) {
  PairHeadParams p;
  p.w = xavier_uniform({4 * d, classes}, seed, prefix + ".w");
  p.b = zeros_param({classes});
  return p;
}

ParamList PairHeadParams::params(const std::string& prefix) {
  return {{prefix + ".w", w}, {prefix + ".b", b}};
}

Tensor pair_feature(const Tensor& fused_premise, const Tensor& fused_hypothesis) {
  if (fused_premise.rank() != 2 || fused_hypothesis.rank() != 2 ||
      fused_premise.dim(1) != fused_hypothesis.dim(1)) {
    fail(ErrorKind::Dimension, "pair_feature: fused inputs must be rank-2 with equal width");
  }
  Tensor hp = mean_rows(fused_premise);
  Tensor hh = mean_rows(fused_hypothesis);
  return concat_cols({hp, hh, abs(sub(hp, hh)), mul(hp, hh)});
}

Tensor pair_logits(const Tensor& fused_premise, const Tensor& fused_hypothesis,
                   const PairHeadParams& p) {
  Tensor feat = pair_feature(fused_premise, fused_hypothesis);
  if (feat.size() != p.w.dim(0)) {
    fail(ErrorKind::Dimension, "pair_logits: feature width " + std::to_string(feat.size()) +
                                   " does not match head " + shape_str(p.w.shape()));
  }
  return add(matmul(reshape(feat, {1, feat.size()}), p.w), p.b);
}

Tensor classify_pair(const Tensor& fused_premise, const Tensor& fused_hypothesis,
                     const PairHeadParams& p) {
  Tensor probs = softmax(pair_logits(fused_premise, fused_hypothesis, p));
  return reshape(probs, {p.w.dim(1)});
}

DecoderParams DecoderParams::init(std::size_t vocab, std::size_t d, std::size_t heads,
                                  std::size_t d_ff, std::size_t max_len, std::uint64_t seed,
                                  const std::string& prefix) {
  DecoderParams p;
  p.max_len = max_len;
  p.token_table = normal_init({vocab, d}, 0.1, seed, prefix + ".token_table");
  p.pos_table = normal_init({max_len, d}, 0.1, seed, prefix + ".pos_table");
  p.self_attn = AttentionParams::init(d, heads, seed, prefix + ".self");
  p.ln1_g = ones_param({d});
  p.ln1_b = zeros_param({d});
  p.cross_attn = AttentionParams::init(d, heads, seed, prefix + ".cross");
  p.ln2_g = ones_param({d});
  p.ln2_b = zeros_param({d});
  p.ff_w1 = xavier_uniform({d, d_ff}, seed, prefix + ".ff.w1");
  p.ff_b1 = zeros_param({d_ff});
  p.ff_w2 = xavier_uniform({d_ff, d}, seed, prefix + ".ff.w2");
  p.ff_b2 = zeros_param({d});
  p.ln3_g = ones_param({d});
  p.ln3_b = zeros_param({d});
  p.out_w = xavier_uniform({d, vocab}, seed, prefix + ".out.w");
  p.out_b = zeros_param({vocab});
  return p;
}

ParamList DecoderParams::params(const std::string& prefix) {
  ParamList out{{prefix + ".token_table", token_table}, {prefix + ".pos_table", pos_table}};
  append_params(out, self_attn.params(prefix + ".self"));
  ParamList mid{{prefix + ".ln1.g", ln1_g}, {prefix + ".ln1.b", ln1_b}};
  append_params(out, mid);
  append_params(out, cross_attn.params(prefix + ".cross"));
  ParamList rest{{prefix + ".ln2.g", ln2_g},   {prefix + ".ln2.b", ln2_b},
                 {prefix + ".ff.w1", ff_w1},   {prefix + ".ff.b1", ff_b1},
                 {prefix + ".ff.w2", ff_w2},   {prefix + ".ff.b2", ff_b2},
                 {prefix + ".ln3.g", ln3_g},   {prefix + ".ln3.b", ln3_b},
                 {prefix + ".out.w", out_w},   {prefix + ".out.b", out_b}};
  append_params(out, rest);
  return out;
}

Tensor decoder_logits(const std::vector<std::size_t>& prefix, const Tensor& fused_source,
                      const DecoderParams& p) {
  if (prefix.empty()) fail(ErrorKind::Contract, "decoder_logits: empty prefix");
  if (prefix.size() > p.max_len) {
    fail(ErrorKind::Contract, "decoder_logits: prefix of " + std::to_string(prefix.size()) +
                                  " tokens exceeds the limit of " + std::to_string(p.max_len));
  }
  if (fused_source.rank() != 2 || fused_source.dim(1) != p.token_table.dim(1)) {
    fail(ErrorKind::Dimension, "decoder_logits: fused source " +
                                   shape_str(fused_source.shape()) +
                                   " does not match decoder width");
  }
  const std::size_t len = prefix.size();

  std::vector<std::size_t> positions(len);
  std::iota(positions.begin(), positions.end(), 0);
  Tensor x = add(embedding_rows(p.token_table, prefix), embedding_rows(p.pos_table, positions));

  // Strictly-upper-triangular -1e30 keeps position t from seeing t+1 onward.
  std::vector<double> causal(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) causal[i * len + j] = -1e30;
  Tensor causal_bias = Tensor::from_data({len, len}, std::move(causal));

  Tensor a = multi_head_attention(x, x, x, p.self_attn, &causal_bias);
  x = layer_norm(add(x, a), p.ln1_g, p.ln1_b, p.ln_eps);
  Tensor c = multi_head_attention(x, fused_source, fused_source, p.cross_attn);
  x = layer_norm(add(x, c), p.ln2_g, p.ln2_b, p.ln_eps);
  Tensor f = add(matmul(relu(add(matmul(x, p.ff_w1), p.ff_b1)), p.ff_w2), p.ff_b2);
  x = layer_norm(add(x, f), p.ln3_g, p.ln3_b, p.ln_eps);
  return add(matmul(x, p.out_w), p.out_b);
}

DecodeResult greedy_decode(const Tensor& fused_source, const DecoderParams& p,
                           std::size_t bos_id, std::size_t eos_id, std::size_t max_len) {
  NoGradGuard eval_only;
  DecodeResult result;
  std::vector<std::size_t> prefix{bos_id};
  const std::size_t vocab = p.out_w.dim(1);
  const std::size_t limit = std::min(max_len, p.max_len - 1);
  while (result.tokens.size() < limit) {
    Tensor logits = decoder_logits(prefix, fused_source, p);
    const auto& lv = logits.data();
    const double* last = lv.data() + (prefix.size() - 1) * vocab;
    std::size_t best = 0;
    for (std::size_t j = 1; j < vocab; ++j) {
      if (last[j] > last[best]) best = j;
    }
    if (best == eos_id) return result;
    result.tokens.push_back(best);
    prefix.push_back(best);
  }
  result.truncated = true;
  return result;
}

}  // namespace visaw
