#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visaw/params.hpp"
#include "visaw/tensor.hpp"

namespace visaw {

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t heads = 4;

  static AttentionParams init(std::size_t d, std::size_t heads, std::uint64_t seed,
                              const std::string& prefix);
  ParamList params(const std::string& prefix);
};

// Scaled dot-product attention with `heads` parallel slices of width
// d/heads; scores scale by 1/sqrt(d/heads). `score_bias`, when given, is
// added to every head's [queries x keys] score matrix before softmax
// (use large negative entries to mask keys). `attn_out`, when given,
// collects each head's softmaxed weights.
Tensor multi_head_attention(const Tensor& queries_in, const Tensor& keys_in,
                            const Tensor& values_in, const AttentionParams& p,
                            const Tensor* score_bias = nullptr,
                            std::vector<Tensor>* attn_out = nullptr);

struct EncoderLayerParams {
  AttentionParams attn;
  Tensor ln1_g, ln1_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln2_g, ln2_b;
};

// Post-norm transformer encoder over learned token + position embeddings.
struct EncoderParams {
  Tensor token_table;  // [vocab x d]
  Tensor pos_table;    // [max_len x d]
  std::vector<EncoderLayerParams> layers;
  std::size_t heads = 4;
  std::size_t max_len = 64;
  double ln_eps = 1e-6;

  static EncoderParams init(std::size_t vocab, std::size_t d, std::size_t layers,
                            std::size_t heads, std::size_t d_ff, std::size_t max_len,
                            std::uint64_t seed, const std::string& prefix = "enc");
  ParamList params(const std::string& prefix = "enc");
};

// Token states [len x d]. `mask`, when given, marks real tokens with 1;
// padding keys are pushed to -1e30 before softmax so they get no weight.
Tensor transformer_encode(const std::vector<std::size_t>& tokens, const EncoderParams& p,
                          const std::vector<std::uint8_t>* mask = nullptr,
                          std::vector<Tensor>* attn_out = nullptr);

// Affine + relu lift of pooled image vectors into the encoder width. Rows
// are processed independently: no position is attached to an image.
struct ImageProjParams {
  Tensor w, b;  // [d_img x d], [d]

  static ImageProjParams init(std::size_t d_img, std::size_t d, std::uint64_t seed,
                              const std::string& prefix = "imgproj");
  ParamList params(const std::string& prefix = "imgproj");
};

Tensor project_images(const Tensor& pooled, const ImageProjParams& p);  // [m x d_img] -> [m x d]

struct FusionParams {
  AttentionParams attn;   // queries from text, keys/values from images
  Tensor w, b;            // merge transform, [d x d] applied as x.W, and [d]
  Tensor ln_g, ln_b;
  double ln_eps = 1e-6;

  static FusionParams init(std::size_t d, std::size_t heads, std::uint64_t seed,
                           const std::string& prefix = "fusion");
  ParamList params(const std::string& prefix = "fusion");
};

// Cross-attention from token states onto the retrieved image memory
// ([m x d]). An undefined memory handle means nothing was retrieved: the
// result is an all-zero tensor and no attention parameter is touched.
Tensor attend_fuse(const Tensor& token_states, const Tensor& image_memory,
                   const FusionParams& p, std::vector<Tensor>* attn_out = nullptr);

// LayerNorm(W(H + H') + b) with H' from attend_fuse.
Tensor residual_norm_fuse(const Tensor& token_states, const Tensor& attended,
                          const FusionParams& p);

// attend_fuse followed by residual_norm_fuse.
Tensor fuse(const Tensor& token_states, const Tensor& image_memory, const FusionParams& p);

}  // namespace visaw
