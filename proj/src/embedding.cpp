#include "visaw/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "visaw/errors.hpp"
#include "visaw/ops.hpp"

namespace visaw {

namespace {

Tensor one_minus(const Tensor& t) { return add_scalar(scale(t, -1.0), 1.0); }

Tensor affine_1d(const Tensor& v, const Tensor& w, const Tensor& b) {
  Tensor m = reshape(v, {1, v.size()});
  return reshape(add(matmul(m, w), b), {w.dim(1)});
}

void require_unit(const char* op, const char* arg, const Tensor& v) {
  double nsq = 0.0;
  for (double x : v.data()) nsq += x * x;
  if (std::abs(std::sqrt(nsq) - 1.0) > 1e-4) {
    fail(ErrorKind::Contract, std::string(op) + ": " + arg + " is not unit-norm");
  }
}

}  // namespace

TextPathParams TextPathParams::init(std::size_t vocab, std::size_t d_t, std::size_t d_s,
                                    std::uint64_t seed) {
  TextPathParams p;
  p.token_table = normal_init({vocab, d_t}, 0.1, seed, "text.token_table");
  p.w_f = xavier_uniform({d_t, d_t}, seed, "text.w_f");
  p.b_f = zeros_param({d_t});
  p.w_r = xavier_uniform({d_t, d_t}, seed, "text.w_r");
  p.b_r = zeros_param({d_t});
  p.w_c = xavier_uniform({d_t, d_t}, seed, "text.w_c");
  p.proj_w = xavier_uniform({d_t, d_s}, seed, "text.proj_w");
  p.proj_b = zeros_param({d_s});
  return p;
}

ParamList TextPathParams::params() {
  return {{"text.token_table", token_table}, {"text.w_f", w_f},       {"text.b_f", b_f},
          {"text.w_r", w_r},                 {"text.b_r", b_r},       {"text.w_c", w_c},
          {"text.proj_w", proj_w},           {"text.proj_b", proj_b}};
}

ImagePathParams ImagePathParams::init(std::size_t d_img, std::size_t d_s, WeldonConfig pool,
                                      std::uint64_t seed) {
  ImagePathParams p;
  p.pool = pool;
  p.proj_w = xavier_uniform({d_img, d_s}, seed, "image.proj_w");
  p.proj_b = zeros_param({d_s});
  return p;
}

ParamList ImagePathParams::params() {
  return {{"image.proj_w", proj_w}, {"image.proj_b", proj_b}};
}

Tensor weldon_pool(const Tensor& regions, const WeldonConfig& cfg) {
  if (regions.rank() != 2) {
    fail(ErrorKind::Dimension, "weldon_pool: regions must be rank-2, got " +
                                   shape_str(regions.shape()));
  }
  const std::size_t r = regions.dim(0), d = regions.dim(1);
  if (cfg.k_plus < 1) fail(ErrorKind::Config, "weldon_pool: k_plus must be at least 1");
  if (cfg.k_plus + cfg.k_minus > r) {
    fail(ErrorKind::Config, "weldon_pool: k_plus + k_minus exceeds " + std::to_string(r) +
                                " regions");
  }
  const auto& rv = regions.data();
  std::vector<double> out(d, 0.0);
  // Selected region indices per channel, kept for the backward scatter.
  std::vector<std::size_t> top_sel(d * cfg.k_plus);
  std::vector<std::size_t> bot_sel(d * cfg.k_minus);
  std::vector<std::size_t> order(r);
  for (std::size_t c = 0; c < d; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double va = rv[a * d + c], vb = rv[b * d + c];
      if (va != vb) return va > vb;
      return a < b;
    });
    double top = 0.0;  // descending order, largest first
    for (std::size_t k = 0; k < cfg.k_plus; ++k) {
      top += rv[order[k] * d + c];
      top_sel[c * cfg.k_plus + k] = order[k];
    }
    out[c] = top / static_cast<double>(cfg.k_plus);
    if (cfg.k_minus > 0) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double va = rv[a * d + c], vb = rv[b * d + c];
        if (va != vb) return va < vb;
        return a < b;
      });
      double bottom = 0.0;  // ascending order, smallest first
      for (std::size_t k = 0; k < cfg.k_minus; ++k) {
        bottom += rv[order[k] * d + c];
        bot_sel[c * cfg.k_minus + k] = order[k];
      }
      out[c] += cfg.beta * bottom / static_cast<double>(cfg.k_minus);
    }
  }
  Tensor pooled = Tensor::from_data({d}, std::move(out));
  if (grad_enabled() && regions.requires_grad()) {
    Tensor pr = regions;
    pooled.attach({regions}, [pr, top_sel = std::move(top_sel), bot_sel = std::move(bot_sel),
                              cfg, d](const std::vector<double>& g) {
      auto& gr = Tensor::grad_slot(pr);
      const double wt = 1.0 / static_cast<double>(cfg.k_plus);
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t k = 0; k < cfg.k_plus; ++k)
          gr[top_sel[c * cfg.k_plus + k] * d + c] += g[c] * wt;
      }
      if (cfg.k_minus > 0) {
        const double wb = cfg.beta / static_cast<double>(cfg.k_minus);
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t k = 0; k < cfg.k_minus; ++k)
            gr[bot_sel[c * cfg.k_minus + k] * d + c] += g[c] * wb;
        }
      }
    });
  }
  return pooled;
}

Tensor encode_text(const std::vector<std::size_t>& tokens, const TextPathParams& p,
                   std::size_t max_len) {
  if (tokens.empty()) fail(ErrorKind::Contract, "encode_text: empty token sequence");
  if (tokens.size() > max_len) {
    fail(ErrorKind::Contract, "encode_text: sequence of " + std::to_string(tokens.size()) +
                                  " tokens exceeds the limit of " + std::to_string(max_len));
  }
  const std::size_t t_len = tokens.size();
  const std::size_t d_t = p.token_table.dim(1);

  Tensor e = embedding_rows(p.token_table, tokens);  // [T x d_t]
  Tensor f_all = sigmoid(add(matmul(e, p.w_f), p.b_f));
  Tensor r_all = sigmoid(add(matmul(e, p.w_r), p.b_r));
  Tensor u_all = matmul(e, p.w_c);

  Tensor c_prev = Tensor::zeros({d_t});
  Tensor h_sum;
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor f_t = row(f_all, t);
    Tensor c_t = add(mul(f_t, c_prev), mul(one_minus(f_t), row(u_all, t)));
    Tensor r_t = row(r_all, t);
    Tensor h_t = add(mul(r_t, c_t), mul(one_minus(r_t), row(e, t)));
    h_sum = h_sum.defined() ? add(h_sum, h_t) : h_t;
    c_prev = c_t;
  }
  Tensor pooled = scale(h_sum, 1.0 / static_cast<double>(t_len));
  return l2_normalize(affine_1d(pooled, p.proj_w, p.proj_b));
}

Tensor encode_image(const Tensor& regions, const ImagePathParams& p) {
  if (regions.rank() != 2 || regions.dim(1) != p.proj_w.dim(0)) {
    fail(ErrorKind::Dimension, "encode_image: regions " + shape_str(regions.shape()) +
                                   " do not match projection " + shape_str(p.proj_w.shape()));
  }
  Tensor pooled = weldon_pool(regions, p.pool);
  return l2_normalize(affine_1d(pooled, p.proj_w, p.proj_b));
}

Tensor triplet_loss(const Tensor& x, const Tensor& y, const Tensor& z, double alpha) {
  if (x.rank() != 1 || x.shape() != y.shape() || x.shape() != z.shape()) {
    fail(ErrorKind::Dimension, "triplet_loss: operands must be rank-1 and share a shape");
  }
  if (alpha < 0.0) fail(ErrorKind::Config, "triplet_loss: alpha must be non-negative");
  require_unit("triplet_loss", "anchor", x);
  require_unit("triplet_loss", "positive", y);
  require_unit("triplet_loss", "negative", z);
  return relu(add_scalar(sub(dot(x, z), dot(x, y)), alpha));
}

std::size_t mine_hard_negative(const Tensor& anchor, const std::vector<Tensor>& candidates,
                               const std::vector<std::size_t>& forbidden) {
  const auto& av = anchor.data();
  double anorm = 0.0;
  for (double v : av) anorm += v * v;
  anorm = std::sqrt(anorm);
  if (anorm == 0.0) fail(ErrorKind::Numeric, "mine_hard_negative: zero-norm anchor");

  bool found = false;
  std::size_t best = 0;
  double best_cos = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (std::find(forbidden.begin(), forbidden.end(), i) != forbidden.end()) continue;
    const auto& cv = candidates[i].data();
    if (cv.size() != av.size()) {
      fail(ErrorKind::Dimension, "mine_hard_negative: candidate " + std::to_string(i) +
                                     " has mismatched length");
    }
    double d = 0.0, cnorm = 0.0;
    for (std::size_t j = 0; j < cv.size(); ++j) {
      d += av[j] * cv[j];
      cnorm += cv[j] * cv[j];
    }
    cnorm = std::sqrt(cnorm);
    if (cnorm == 0.0) fail(ErrorKind::Numeric, "mine_hard_negative: zero-norm candidate");
    double cos = d / (anorm * cnorm);
    if (!found || cos > best_cos) {  // strict: ties keep the lowest index
      found = true;
      best = i;
      best_cos = cos;
    }
  }
  if (!found) fail(ErrorKind::Contract, "mine_hard_negative: no eligible negative");
  return best;
}

EmbedModel EmbedModel::init(std::size_t vocab, std::size_t d_t, std::size_t d_s,
                            std::size_t d_img, WeldonConfig pool, std::uint64_t seed) {
  EmbedModel m;
  m.text = TextPathParams::init(vocab, d_t, d_s, seed);
  m.image = ImagePathParams::init(d_img, d_s, pool, seed);
  return m;
}

ParamList EmbedModel::params() {
  ParamList out = text.params();
  append_params(out, image.params());
  return out;
}

std::vector<double> train_embedding(
    EmbedModel& model, const std::vector<EmbedPair>& pairs, const EmbedTrainOptions& opt,
    const std::function<void(std::size_t, double)>& on_epoch) {
  if (pairs.empty()) fail(ErrorKind::Contract, "train_embedding: no training pairs");
  if (opt.batch_size < 2) {
    fail(ErrorKind::Config, "train_embedding: batch_size must be at least 2");
  }

  ParamList params = model.params();
  Adam adam(opt.adam);
  Rng order_rng = Rng::for_name(opt.seed, "train-embed.order");

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> epoch_losses;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t triplet_count = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t b = std::min(opt.batch_size, order.size() - start);
      if (b < 2) continue;  // no in-batch negative available

      std::vector<Tensor> text_vecs(b), image_vecs(b);
      for (std::size_t i = 0; i < b; ++i) {
        const EmbedPair& pair = pairs[order[start + i]];
        text_vecs[i] = encode_text(pair.text, model.text, opt.max_len);
        image_vecs[i] = encode_image(pair.regions, model.image);
      }

      Tensor batch_loss;
      std::size_t batch_triplets = 0;
      for (std::size_t i = 0; i < b; ++i) {
        std::size_t neg = mine_hard_negative(image_vecs[i], text_vecs, {i});
        Tensor l = triplet_loss(image_vecs[i], text_vecs[i], text_vecs[neg], opt.alpha);
        batch_loss = batch_loss.defined() ? add(batch_loss, l) : l;
        ++batch_triplets;
        if (opt.symmetric) {
          std::size_t neg_img = mine_hard_negative(text_vecs[i], image_vecs, {i});
          Tensor ls = triplet_loss(text_vecs[i], image_vecs[i], image_vecs[neg_img], opt.alpha);
          batch_loss = add(batch_loss, ls);
          ++batch_triplets;
        }
      }
      Tensor mean_loss = scale(batch_loss, 1.0 / static_cast<double>(batch_triplets));
      loss_sum += batch_loss.value();
      triplet_count += batch_triplets;

      zero_grads(params);
      mean_loss.backward();
      adam.step(params);
    }
    double mean = triplet_count ? loss_sum / static_cast<double>(triplet_count) : 0.0;
    epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return epoch_losses;
}

}  // namespace visaw
