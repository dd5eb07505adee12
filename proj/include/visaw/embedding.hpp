#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "visaw/adam.hpp"
#include "visaw/params.hpp"
#include "visaw/tensor.hpp"

namespace visaw {

// Text side: token embeddings feed a single-layer simple recurrent unit
// with a forget and a reset gate over a cell state that starts at zero:
//   f_t = sigmoid(W_f e_t + b_f)
//   c_t = f_t * c_{t-1} + (1 - f_t) * (W e_t)
//   r_t = sigmoid(W_r e_t + b_r)
//   h_t = r_t * c_t + (1 - r_t) * e_t
// Hidden states are mean-pooled, projected to the shared dimension, and
// L2-normalized.
struct TextPathParams {
  Tensor token_table;  // [vocab x d_t]
  Tensor w_f, b_f;     // forget gate
  Tensor w_r, b_r;     // reset gate
  Tensor w_c;          // cell candidate (no bias)
  Tensor proj_w, proj_b;  // [d_t x d_s], [d_s]

  static TextPathParams init(std::size_t vocab, std::size_t d_t, std::size_t d_s,
                             std::uint64_t seed);
  ParamList params();
};

struct WeldonConfig {
  std::size_t k_plus = 3;
  std::size_t k_minus = 3;
  double beta = 1.0;
};

// Image side: per-channel max+min evidence pooling over region features,
// then an affine projection into the shared space and L2 normalization.
struct ImagePathParams {
  WeldonConfig pool;
  Tensor proj_w, proj_b;  // [d_img x d_s], [d_s]

  static ImagePathParams init(std::size_t d_img, std::size_t d_s, WeldonConfig pool,
                              std::uint64_t seed);
  ParamList params();
};

// Per channel: mean of the k_plus largest entries plus beta times the mean
// of the k_minus smallest (omitted when k_minus is 0). Top values are
// summed in descending order, bottom values in ascending order, so results
// are bit-reproducible against a sort-based oracle. Ties select the lower
// region index.
Tensor weldon_pool(const Tensor& regions, const WeldonConfig& cfg);

Tensor encode_text(const std::vector<std::size_t>& tokens, const TextPathParams& p,
                   std::size_t max_len = 64);
Tensor encode_image(const Tensor& regions, const ImagePathParams& p);

// Hinge ranking loss max(0, alpha - x.y + x.z) for an anchor x, positive y
// and negative z, all unit-norm within 1e-4.
Tensor triplet_loss(const Tensor& x, const Tensor& y, const Tensor& z, double alpha);

// Index of the candidate with the highest cosine against the anchor,
// skipping `forbidden`; ties resolve to the lowest index.
std::size_t mine_hard_negative(const Tensor& anchor, const std::vector<Tensor>& candidates,
                               const std::vector<std::size_t>& forbidden);

struct EmbedPair {
  std::vector<std::size_t> text;  // token ids
  Tensor regions;                 // [R x d_img], constant input
};

struct EmbedModel {
  TextPathParams text;
  ImagePathParams image;

  static EmbedModel init(std::size_t vocab, std::size_t d_t, std::size_t d_s,
                         std::size_t d_img, WeldonConfig pool, std::uint64_t seed);
  ParamList params();
};

struct EmbedTrainOptions {
  double alpha = 0.2;
  bool symmetric = false;  // add the text-anchored hinge as well
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t max_len = 64;
  std::uint64_t seed = 0;
};

// In-batch training: every image anchors a triplet whose negative is the
// hardest non-matching caption in the batch. Returns per-epoch mean loss.
// Batches too small to offer a negative (fewer than two pairs) are skipped.
std::vector<double> train_embedding(
    EmbedModel& model, const std::vector<EmbedPair>& pairs, const EmbedTrainOptions& opt,
    const std::function<void(std::size_t epoch, double mean_loss)>& on_epoch = {});

}  // namespace visaw
