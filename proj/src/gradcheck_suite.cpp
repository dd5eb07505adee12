#include <cmath>
#include <utility>

#include "visaw/embedding.hpp"
#include "visaw/fusion.hpp"
#include "visaw/gradcheck.hpp"
#include "visaw/heads.hpp"
#include "visaw/ops.hpp"
#include "visaw/rng.hpp"

namespace visaw {

namespace {

constexpr std::size_t kPoints = 10;

Tensor rand_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> values(numel(shape));
  for (double& v : values) v = rng.normal(0.0, scale);
  Tensor t = Tensor::from_data(std::move(shape), std::move(values));
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

// For kinked ops (relu, abs): keep every coordinate clear of zero so the
// finite-difference window never straddles the kink.
Tensor rand_off_kink(Shape shape, Rng& rng, double min_abs = 1e-2) {
  Tensor t = rand_tensor(std::move(shape), rng);
  for (double& v : t.data()) {
    if (std::abs(v) < min_abs) v = v < 0.0 ? v - min_abs : v + min_abs;
  }
  return t;
}

Tensor rand_unit(std::size_t n, Rng& rng) {
  Tensor t = rand_tensor({n}, rng);
  double norm = 0.0;
  for (double v : t.data()) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : t.data()) v /= norm;
  return t;
}

// Scalarizes a non-scalar output with fixed random weights so every output
// coordinate contributes a distinct term to the checked gradient.
Tensor weighted_sum(const Tensor& y, Rng& rng) {
  return sum_all(mul(y, rand_tensor(y.shape(), rng, 1.0, false)));
}

std::vector<Tensor> tensors_of(ParamList params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (NamedParam& p : params) out.push_back(p.tensor);
  return out;
}

std::vector<std::size_t> rand_tokens(std::size_t len, std::size_t vocab, Rng& rng) {
  std::vector<std::size_t> ids(len);
  for (std::size_t& id : ids) id = rng.index(vocab);
  return ids;
}

struct Suite {
  std::uint64_t seed;
  std::vector<GradCheckReport> reports;

  using Builder = std::function<std::pair<std::vector<Tensor>, LossFn>(Rng&)>;

  void run(const std::string& name, double tolerance, std::size_t max_coords,
           const Builder& build) {
    GradCheckReport agg{name, 0.0, tolerance, true};
    for (std::size_t point = 0; point < kPoints; ++point) {
      Rng rng = Rng::for_name(seed, "gradcheck." + name + ".point" + std::to_string(point));
      auto [inputs, fn] = build(rng);
      GradCheckReport r = grad_check(name, fn, inputs, tolerance, 1e-5, max_coords,
                                     seed * kPoints + point);
      agg.max_rel_err = std::max(agg.max_rel_err, r.max_rel_err);
      agg.pass = agg.pass && r.pass;
    }
    reports.push_back(agg);
  }
};

}  // namespace

std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed) {
  Suite s{seed, {}};
  const double kOp = 1e-6;     // single ops
  const double kStack = 1e-4;  // composed models

  s.run("add", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({3, 4}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(7);
              return weighted_sum(add(a, b), w);
            }};
  });
  s.run("add_broadcast", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(8);
              return weighted_sum(add(a, b), w);
            }};
  });
  s.run("sub", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 5}, rng), b = rand_tensor({2, 5}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(9);
              return weighted_sum(sub(a, b), w);
            }};
  });
  s.run("mul", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 5}, rng), b = rand_tensor({2, 5}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(10);
              return weighted_sum(mul(a, b), w);
            }};
  });
  s.run("mul_broadcast", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 5}, rng), b = rand_tensor({5}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(11);
              return weighted_sum(mul(a, b), w);
            }};
  });
  s.run("scale", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 3}, rng);
    double k = rng.uniform(-2.0, 2.0);
    return {{a}, [a, k](const std::vector<Tensor>&) {
              Rng w(12);
              return weighted_sum(scale(a, k), w);
            }};
  });
  s.run("add_scalar", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 3}, rng);
    double k = rng.uniform(-2.0, 2.0);
    return {{a}, [a, k](const std::vector<Tensor>&) {
              Rng w(13);
              return weighted_sum(add_scalar(a, k), w);
            }};
  });
  s.run("sigmoid", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 6}, rng, 2.0);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(14);
              return weighted_sum(sigmoid(a), w);
            }};
  });
  s.run("tanh", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 6}, rng, 2.0);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(15);
              return weighted_sum(visaw::tanh(a), w);
            }};
  });
  s.run("relu", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_off_kink({3, 5}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(16);
              return weighted_sum(relu(a), w);
            }};
  });
  s.run("abs", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_off_kink({3, 5}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(17);
              return weighted_sum(visaw::abs(a), w);
            }};
  });
  s.run("matmul", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) {
              Rng w(18);
              return weighted_sum(matmul(a, b), w);
            }};
  });
  s.run("transpose", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(19);
              return weighted_sum(transpose(a), w);
            }};
  });
  s.run("softmax", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 7}, rng, 3.0);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(20);
              return weighted_sum(softmax(a), w);
            }};
  });
  s.run("layer_norm", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor x = rand_tensor({3, 5}, rng, 2.0);
    Tensor g = rand_tensor({5}, rng, 0.3);
    for (double& v : g.data()) v += 1.0;
    Tensor b = rand_tensor({5}, rng, 0.3);
    return {{x, g, b}, [x, g, b](const std::vector<Tensor>&) {
              Rng w(21);
              return weighted_sum(layer_norm(x, g, b, 1e-6), w);
            }};
  });
  s.run("sum_all", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng);
    return {{a}, [a](const std::vector<Tensor>&) { return sum_all(a); }};
  });
  s.run("mean_all", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng);
    return {{a}, [a](const std::vector<Tensor>&) { return mean_all(a); }};
  });
  s.run("mean_rows", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({4, 3}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(22);
              return weighted_sum(mean_rows(a), w);
            }};
  });
  s.run("row", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({4, 5}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(23);
              return weighted_sum(row(a, 2), w);
            }};
  });
  s.run("dot", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({6}, rng), b = rand_tensor({6}, rng);
    return {{a, b}, [a, b](const std::vector<Tensor>&) { return dot(a, b); }};
  });
  s.run("concat_cols", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({2, 3}, rng), b = rand_tensor({2, 2}, rng),
           c = rand_tensor({2, 4}, rng);
    return {{a, b, c}, [a, b, c](const std::vector<Tensor>&) {
              Rng w(24);
              return weighted_sum(concat_cols({a, b, c}), w);
            }};
  });
  s.run("slice_cols", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 8}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(25);
              return weighted_sum(slice_cols(a, 2, 4), w);
            }};
  });
  s.run("reshape", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({3, 4}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(26);
              return weighted_sum(reshape(a, {2, 6}), w);
            }};
  });
  s.run("embedding_rows", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor table = rand_tensor({7, 4}, rng);
    std::vector<std::size_t> ids{1, 3, 3, 0, 6};
    return {{table}, [table, ids](const std::vector<Tensor>&) {
              Rng w(27);
              return weighted_sum(embedding_rows(table, ids), w);
            }};
  });
  s.run("l2_normalize", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor a = rand_tensor({6}, rng);
    return {{a}, [a](const std::vector<Tensor>&) {
              Rng w(28);
              return weighted_sum(l2_normalize(a), w);
            }};
  });
  s.run("cross_entropy", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor logits = rand_tensor({4, 5}, rng, 2.0);
    std::vector<std::size_t> targets{rng.index(5), rng.index(5), rng.index(5), rng.index(5)};
    return {{logits}, [logits, targets](const std::vector<Tensor>&) {
              return cross_entropy(logits, targets);
            }};
  });
  s.run("cross_entropy_masked", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor logits = rand_tensor({4, 5}, rng, 2.0);
    std::vector<std::size_t> targets{rng.index(5), rng.index(5), rng.index(5), rng.index(5)};
    auto mask = std::make_shared<std::vector<std::uint8_t>>(std::vector<std::uint8_t>{1, 0, 1, 1});
    return {{logits}, [logits, targets, mask](const std::vector<Tensor>&) {
              return cross_entropy(logits, targets, mask.get());
            }};
  });
  s.run("weldon_pool", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor regions = rand_tensor({10, 6}, rng);
    WeldonConfig cfg{3, 2, 0.7};
    return {{regions}, [regions, cfg](const std::vector<Tensor>&) {
              Rng w(29);
              return weighted_sum(weldon_pool(regions, cfg), w);
            }};
  });
  s.run("weldon_pool_top_only", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor regions = rand_tensor({6, 4}, rng);
    WeldonConfig cfg{6, 0, 1.0};
    return {{regions}, [regions, cfg](const std::vector<Tensor>&) {
              Rng w(30);
              return weighted_sum(weldon_pool(regions, cfg), w);
            }};
  });
  s.run("triplet_loss", kOp, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    Tensor x = rand_unit(5, rng), y = rand_unit(5, rng), z = rand_unit(5, rng);
    // alpha = 5 keeps the hinge strictly active: alpha - x.y + x.z >= 3.
    return {{x, y, z},
            [x, y, z](const std::vector<Tensor>&) { return triplet_loss(x, y, z, 5.0); }};
  });

  s.run("sru_text_path", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    TextPathParams p = TextPathParams::init(9, 6, 4, sub);
    std::vector<std::size_t> tokens = rand_tokens(4, 9, rng);
    return {tensors_of(p.params()), [p, tokens](const std::vector<Tensor>&) {
              Rng w(31);
              return weighted_sum(encode_text(tokens, p, 8), w);
            }};
  });
  s.run("image_path", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    ImagePathParams p = ImagePathParams::init(5, 4, {2, 2, 0.8}, sub);
    Tensor regions = rand_tensor({8, 5}, rng);
    std::vector<Tensor> inputs = tensors_of(p.params());
    inputs.push_back(regions);
    return {inputs, [p, regions](const std::vector<Tensor>&) {
              Rng w(32);
              return weighted_sum(encode_image(regions, p), w);
            }};
  });
  s.run("embedding_triplet", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    EmbedModel model = EmbedModel::init(9, 6, 4, 5, {2, 2, 0.8}, sub);
    Tensor regions = rand_tensor({8, 5}, rng);
    std::vector<std::size_t> pos = rand_tokens(4, 9, rng);
    std::vector<std::size_t> neg = rand_tokens(5, 9, rng);
    std::vector<Tensor> inputs = tensors_of(model.params());
    inputs.push_back(regions);
    return {inputs, [model, regions, pos, neg](const std::vector<Tensor>&) mutable {
              Tensor x = encode_image(regions, model.image);
              Tensor y = encode_text(pos, model.text, 8);
              Tensor z = encode_text(neg, model.text, 8);
              return triplet_loss(x, y, z, 5.0);
            }};
  });
  s.run("multi_head_attention", kStack, 0,
        [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
          std::uint64_t sub = rng.engine()();
          AttentionParams p = AttentionParams::init(8, 2, sub, "t");
          Tensor q = rand_tensor({4, 8}, rng);
          Tensor m = rand_tensor({3, 8}, rng);
          std::vector<Tensor> inputs = tensors_of(p.params("t"));
          inputs.push_back(q);
          inputs.push_back(m);
          return {inputs, [p, q, m](const std::vector<Tensor>&) {
                    Rng w(33);
                    return weighted_sum(multi_head_attention(q, m, m, p), w);
                  }};
        });
  s.run("project_images", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    ImageProjParams p = ImageProjParams::init(6, 8, sub, "imgproj");
    Tensor pooled = rand_tensor({3, 6}, rng);
    std::vector<Tensor> inputs = tensors_of(p.params("imgproj"));
    inputs.push_back(pooled);
    return {inputs, [p, pooled](const std::vector<Tensor>&) {
              Rng w(34);
              return weighted_sum(project_images(pooled, p), w);
            }};
  });
  s.run("transformer_encoder", kStack, 100,
        [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
          std::uint64_t sub = rng.engine()();
          EncoderParams p = EncoderParams::init(11, 8, 2, 2, 16, 8, sub, "enc");
          std::vector<std::size_t> tokens = rand_tokens(5, 11, rng);
          return {tensors_of(p.params("enc")), [p, tokens](const std::vector<Tensor>&) {
                    Rng w(35);
                    return weighted_sum(transformer_encode(tokens, p), w);
                  }};
        });
  s.run("fusion_block", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    FusionParams p = FusionParams::init(8, 2, sub, "fusion");
    Tensor h = rand_tensor({5, 8}, rng);
    Tensor m = rand_tensor({3, 8}, rng);
    std::vector<Tensor> inputs = tensors_of(p.params("fusion"));
    inputs.push_back(h);
    inputs.push_back(m);
    return {inputs, [p, h, m](const std::vector<Tensor>&) {
              Rng w(36);
              return weighted_sum(fuse(h, m, p), w);
            }};
  });
  s.run("tag_head", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    TagHeadParams p = TagHeadParams::init(8, 4, sub, "tag");
    Tensor fused = rand_tensor({5, 8}, rng);
    std::vector<std::size_t> gold = rand_tokens(5, 4, rng);
    std::vector<Tensor> inputs = tensors_of(p.params("tag"));
    inputs.push_back(fused);
    return {inputs, [p, fused, gold](const std::vector<Tensor>&) {
              return cross_entropy(tag_logits(fused, p), gold);
            }};
  });
  s.run("pair_head", kStack, 0, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    PairHeadParams p = PairHeadParams::init(8, 3, sub, "pair");
    Tensor fp = rand_tensor({4, 8}, rng);
    Tensor fh = rand_tensor({3, 8}, rng);
    std::vector<std::size_t> gold{rng.index(3)};
    std::vector<Tensor> inputs = tensors_of(p.params("pair"));
    inputs.push_back(fp);
    inputs.push_back(fh);
    return {inputs, [p, fp, fh, gold](const std::vector<Tensor>&) {
              return cross_entropy(pair_logits(fp, fh, p), gold);
            }};
  });
  s.run("decoder_head", kStack, 80, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    DecoderParams p = DecoderParams::init(11, 8, 2, 16, 8, sub, "dec");
    Tensor source = rand_tensor({4, 8}, rng);
    std::vector<std::size_t> prefix{0, 5, 7};
    std::vector<std::size_t> gold{5, 7, 1};
    std::vector<Tensor> inputs = tensors_of(p.params("dec"));
    inputs.push_back(source);
    return {inputs, [p, source, prefix, gold](const std::vector<Tensor>&) {
              return cross_entropy(decoder_logits(prefix, source, p), gold);
            }};
  });
  s.run("full_stack_tag", kStack, 60, [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
    std::uint64_t sub = rng.engine()();
    EncoderParams enc = EncoderParams::init(11, 8, 2, 2, 16, 8, sub, "enc");
    ImageProjParams img = ImageProjParams::init(6, 8, sub, "imgproj");
    FusionParams fusion = FusionParams::init(8, 2, sub, "fusion");
    TagHeadParams tag = TagHeadParams::init(8, 4, sub, "tag");
    Tensor memory = rand_tensor({3, 6}, rng);
    std::vector<std::size_t> tokens = rand_tokens(5, 11, rng);
    std::vector<std::size_t> gold = rand_tokens(5, 4, rng);
    std::vector<Tensor> inputs = tensors_of(enc.params("enc"));
    for (Tensor& t : tensors_of(img.params("imgproj"))) inputs.push_back(t);
    for (Tensor& t : tensors_of(fusion.params("fusion"))) inputs.push_back(t);
    for (Tensor& t : tensors_of(tag.params("tag"))) inputs.push_back(t);
    inputs.push_back(memory);
    return {inputs, [enc, img, fusion, tag, memory, tokens, gold](const std::vector<Tensor>&) {
              Tensor h = transformer_encode(tokens, enc);
              Tensor fused = fuse(h, project_images(memory, img), fusion);
              return cross_entropy(tag_logits(fused, tag), gold);
            }};
  });
  s.run("full_stack_decoder", kStack, 50,
        [](Rng& rng) -> std::pair<std::vector<Tensor>, LossFn> {
          std::uint64_t sub = rng.engine()();
          EncoderParams enc = EncoderParams::init(11, 8, 2, 2, 16, 8, sub, "enc");
          ImageProjParams img = ImageProjParams::init(6, 8, sub, "imgproj");
          FusionParams fusion = FusionParams::init(8, 2, sub, "fusion");
          DecoderParams dec = DecoderParams::init(11, 8, 2, 16, 8, sub, "dec");
          Tensor memory = rand_tensor({2, 6}, rng);
          std::vector<std::size_t> tokens = rand_tokens(4, 11, rng);
          std::vector<std::size_t> prefix{0, 6, 3};
          std::vector<std::size_t> gold{6, 3, 1};
          std::vector<Tensor> inputs = tensors_of(enc.params("enc"));
          for (Tensor& t : tensors_of(img.params("imgproj"))) inputs.push_back(t);
          for (Tensor& t : tensors_of(fusion.params("fusion"))) inputs.push_back(t);
          for (Tensor& t : tensors_of(dec.params("dec"))) inputs.push_back(t);
          inputs.push_back(memory);
          return {inputs,
                  [enc, img, fusion, dec, memory, tokens, prefix, gold](const std::vector<Tensor>&) {
                    Tensor h = transformer_encode(tokens, enc);
                    Tensor fused = fuse(h, project_images(memory, img), fusion);
                    return cross_entropy(decoder_logits(prefix, fused, dec), gold);
                  }};
        });

  return s.reports;
}

}  // namespace visaw
