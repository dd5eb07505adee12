#include "visaw/fusion.hpp"

#include <cmath>
#include <numeric>

#include "visaw/errors.hpp"
#include "visaw/ops.hpp"

namespace visaw {

AttentionParams AttentionParams::init(std::size_t d, std::size_t heads, std::uint64_t seed,
                                      const std::string& prefix) {
  if (heads == 0 || d % heads != 0) {
    fail(ErrorKind::Config, "attention: width " + std::to_string(d) +
                                " is not divisible into " + std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.heads = heads;
  p.wq = xavier_uniform({d, d}, seed, prefix + ".wq");
  p.bq = zeros_param({d});
  p.wk = xavier_uniform({d, d}, seed, prefix + ".wk");
  p.bk = zeros_param({d});
  p.wv = xavier_uniform({d, d}, seed, prefix + ".wv");
  p.bv = zeros_param({d});
  p.wo = xavier_uniform({d, d}, seed, prefix + ".wo");
  p.bo = zeros_param({d});
  return p;
}

ParamList AttentionParams::params(const std::string& prefix) {
  return {{prefix + ".wq", wq}, {prefix + ".bq", bq}, {prefix + ".wk", wk},
          {prefix + ".bk", bk}, {prefix + ".wv", wv}, {prefix + ".bv", bv},
          {prefix + ".wo", wo}, {prefix + ".bo", bo}};
}

Tensor multi_head_attention(const Tensor& queries_in, const Tensor& keys_in,
                            const Tensor& values_in, const AttentionParams& p,
                            const Tensor* score_bias, std::vector<Tensor>* attn_out) {
  if (queries_in.rank() != 2 || keys_in.rank() != 2 || values_in.rank() != 2) {
    fail(ErrorKind::Dimension, "attention: inputs must be rank-2");
  }
  const std::size_t d = p.wq.dim(0);
  if (queries_in.dim(1) != d || keys_in.dim(1) != d || values_in.dim(1) != d) {
    fail(ErrorKind::Dimension, "attention: input width does not match parameters of width " +
                                   std::to_string(d));
  }
  if (keys_in.dim(0) != values_in.dim(0)) {
    fail(ErrorKind::Dimension, "attention: keys " + shape_str(keys_in.shape()) +
                                   " and values " + shape_str(values_in.shape()) + " disagree");
  }
  const std::size_t dh = d / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = add(matmul(queries_in, p.wq), p.bq);
  Tensor k = add(matmul(keys_in, p.wk), p.bk);
  Tensor v = add(matmul(values_in, p.wv), p.bv);

  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (score_bias) scores = add(scores, *score_bias);
    Tensor weights = softmax(scores);
    if (attn_out) attn_out->push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  return add(matmul(concat_cols(heads), p.wo), p.bo);
}

EncoderParams EncoderParams::init(std::size_t vocab, std::size_t d, std::size_t layers,
                                  std::size_t heads, std::size_t d_ff, std::size_t max_len,
                                  std::uint64_t seed, const std::string& prefix) {
  EncoderParams p;
  p.heads = heads;
  p.max_len = max_len;
  p.token_table = normal_init({vocab, d}, 0.1, seed, prefix + ".token_table");
  p.pos_table = normal_init({max_len, d}, 0.1, seed, prefix + ".pos_table");
  p.layers.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    std::string lp = prefix + ".l" + std::to_string(l);
    EncoderLayerParams& lay = p.layers[l];
    lay.attn = AttentionParams::init(d, heads, seed, lp + ".attn");
    lay.ln1_g = ones_param({d});
    lay.ln1_b = zeros_param({d});
    lay.ff_w1 = xavier_uniform({d, d_ff}, seed, lp + ".ff.w1");
    lay.ff_b1 = zeros_param({d_ff});
    lay.ff_w2 = xavier_uniform({d_ff, d}, seed, lp + ".ff.w2");
    lay.ff_b2 = zeros_param({d});
    lay.ln2_g = ones_param({d});
    lay.ln2_b = zeros_param({d});
  }
  return p;
}

ParamList EncoderParams::params(const std::string& prefix) {
  ParamList out{{prefix + ".token_table", token_table}, {prefix + ".pos_table", pos_table}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string lp = prefix + ".l" + std::to_string(l);
    EncoderLayerParams& lay = layers[l];
    append_params(out, lay.attn.params(lp + ".attn"));
    ParamList rest{{lp + ".ln1.g", lay.ln1_g},   {lp + ".ln1.b", lay.ln1_b},
                   {lp + ".ff.w1", lay.ff_w1},   {lp + ".ff.b1", lay.ff_b1},
                   {lp + ".ff.w2", lay.ff_w2},   {lp + ".ff.b2", lay.ff_b2},
                   {lp + ".ln2.g", lay.ln2_g},   {lp + ".ln2.b", lay.ln2_b}};
    append_params(out, rest);
  }
  return out;
}

Tensor transformer_encode(const std::vector<std::size_t>& tokens, const EncoderParams& p,
                          const std::vector<std::uint8_t>* mask,
                          std::vector<Tensor>* attn_out) {
  if (tokens.empty()) fail(ErrorKind::Contract, "transformer_encode: empty token sequence");
  if (tokens.size() > p.max_len) {
    fail(ErrorKind::Contract, "transformer_encode: sequence of " +
                                  std::to_string(tokens.size()) +
                                  " tokens exceeds the limit of " + std::to_string(p.max_len));
  }
  if (mask && mask->size() != tokens.size()) {
    fail(ErrorKind::Dimension, "transformer_encode: mask length does not match tokens");
  }
  const std::size_t len = tokens.size();

  std::vector<std::size_t> positions(len);
  std::iota(positions.begin(), positions.end(), 0);
  Tensor x = add(embedding_rows(p.token_table, tokens), embedding_rows(p.pos_table, positions));

  Tensor score_bias;
  if (mask) {
    std::vector<double> bias(len * len, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      if (!(*mask)[j]) {
        for (std::size_t i = 0; i < len; ++i) bias[i * len + j] = -1e30;
      }
    }
    score_bias = Tensor::from_data({len, len}, std::move(bias));
  }

  for (const EncoderLayerParams& lay : p.layers) {
    Tensor a = multi_head_attention(x, x, x, lay.attn,
                                    score_bias.defined() ? &score_bias : nullptr, attn_out);
    x = layer_norm(add(x, a), lay.ln1_g, lay.ln1_b, p.ln_eps);
    Tensor f = add(matmul(relu(add(matmul(x, lay.ff_w1), lay.ff_b1)), lay.ff_w2), lay.ff_b2);
    x = layer_norm(add(x, f), lay.ln2_g, lay.ln2_b, p.ln_eps);
  }
  return x;
}

ImageProjParams ImageProjParams::init(std::size_t d_img, std::size_t d, std::uint64_t seed,
                                      const std::string& prefix) {
  ImageProjParams p;
  p.w = xavier_uniform({d_img, d}, seed, prefix + ".w");
  p.b = zeros_param({d});
  return p;
}

ParamList ImageProjParams::params(const std::string& prefix) {
  return {{prefix + ".w", w}, {prefix + ".b", b}};
}

Tensor project_images(const Tensor& pooled, const ImageProjParams& p) {
  if (!pooled.defined() || pooled.rank() != 2 || pooled.dim(1) != p.w.dim(0)) {
    fail(ErrorKind::Dimension, "project_images: pooled vectors do not match projection " +
                                   shape_str(p.w.shape()));
  }
  return relu(add(matmul(pooled, p.w), p.b));
}

FusionParams FusionParams::init(std::size_t d, std::size_t heads, std::uint64_t seed,
                                const std::string& prefix) {
  FusionParams p;
  p.attn = AttentionParams::init(d, heads, seed, prefix + ".attn");
  p.w = xavier_uniform({d, d}, seed, prefix + ".w");
  p.b = zeros_param({d});
  p.ln_g = ones_param({d});
  p.ln_b = zeros_param({d});
  return p;
}

ParamList FusionParams::params(const std::string& prefix) {
  ParamList out = attn.params(prefix + ".attn");
  ParamList rest{{prefix + ".w", w},
                 {prefix + ".b", b},
                 {prefix + ".ln.g", ln_g},
                 {prefix + ".ln.b", ln_b}};
  append_params(out, rest);
  return out;
}

Tensor attend_fuse(const Tensor& token_states, const Tensor& image_memory,
                   const FusionParams& p, std::vector<Tensor>* attn_out) {
  if (token_states.rank() != 2) {
    fail(ErrorKind::Dimension, "attend_fuse: token states must be rank-2");
  }
  if (!image_memory.defined()) {
    return Tensor::zeros(token_states.shape());
  }
  if (image_memory.rank() != 2 || image_memory.dim(1) != token_states.dim(1)) {
    fail(ErrorKind::Dimension, "attend_fuse: image memory " + shape_str(image_memory.shape()) +
                                   " does not match token states " +
                                   shape_str(token_states.shape()));
  }
  return multi_head_attention(token_states, image_memory, image_memory, p.attn, nullptr,
                              attn_out);
}

Tensor residual_norm_fuse(const Tensor& token_states, const Tensor& attended,
                          const FusionParams& p) {
  if (attended.shape() != token_states.shape()) {
    fail(ErrorKind::Dimension, "residual_norm_fuse: " + shape_str(attended.shape()) +
                                   " does not match " + shape_str(token_states.shape()));
  }
  Tensor merged = add(matmul(add(token_states, attended), p.w), p.b);
  return layer_norm(merged, p.ln_g, p.ln_b, p.ln_eps);
}

Tensor fuse(const Tensor& token_states, const Tensor& image_memory, const FusionParams& p) {
  return residual_norm_fuse(token_states, attend_fuse(token_states, image_memory, p), p);
}

}  // namespace visaw
