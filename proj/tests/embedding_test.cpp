#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "visaw/embedding.hpp"
#include "visaw/errors.hpp"
#include "visaw/ops.hpp"
#include "visaw/rng.hpp"

using namespace visaw;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

double norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  return std::sqrt(s);
}

// Independent pooling oracle: sort each channel's column and average the
// extremes, adding in the same order as the tested code (largest first on
// top, smallest first on bottom) so equality can be exact.
std::vector<double> weldon_oracle(const Tensor& regions, const WeldonConfig& cfg) {
  const std::size_t r = regions.dim(0), d = regions.dim(1);
  std::vector<double> out(d);
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> col(r);
    for (std::size_t i = 0; i < r; ++i) col[i] = regions.at(i * d + c);
    std::sort(col.begin(), col.end());
    double top = 0.0;
    for (std::size_t k = 0; k < cfg.k_plus; ++k) top += col[r - 1 - k];
    out[c] = top / static_cast<double>(cfg.k_plus);
    if (cfg.k_minus > 0) {
      double bot = 0.0;
      for (std::size_t k = 0; k < cfg.k_minus; ++k) bot += col[k];
      out[c] += cfg.beta * bot / static_cast<double>(cfg.k_minus);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("weldon_pool matches the sort oracle exactly on random inputs") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t r = 2 + rng.index(10);
    std::size_t d = 1 + rng.index(6);
    WeldonConfig cfg;
    cfg.k_plus = 1 + rng.index(r);
    cfg.k_minus = rng.index(r - cfg.k_plus + 1);
    cfg.beta = rng.uniform(-1.0, 1.0);
    Tensor regions = rand_tensor({r, d}, rng);
    CHECK(weldon_pool(regions, cfg).data() == weldon_oracle(regions, cfg));
  }
}

TEST_CASE("weldon_pool hand examples") {
  Tensor col = Tensor::from_data({3, 1}, {3, 1, 2});
  CHECK(weldon_pool(col, {1, 1, 1.0}).data() == std::vector<double>{4});      // max + min
  CHECK(weldon_pool(col, {2, 1, 0.5}).data() == std::vector<double>{3});      // 2.5 + 0.5
  CHECK(weldon_pool(col, {3, 0, 1.0}).data() == std::vector<double>{2});      // k_plus = R mean
  Tensor two = Tensor::from_data({2, 2}, {1, 2, 1, 2});                       // identical rows
  CHECK(weldon_pool(two, {1, 1, 0.25}).data() == std::vector<double>{1.25, 2.5});
}

TEST_CASE("weldon_pool validates its configuration") {
  Tensor regions = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(weldon_pool(regions, {0, 1, 1.0}), Error);
  CHECK_THROWS_AS(weldon_pool(regions, {2, 2, 1.0}), Error);
  CHECK_THROWS_AS(weldon_pool(Tensor::from_data({3}, {1, 2, 3}), {1, 1, 1.0}), Error);
}

TEST_CASE("weldon_pool gradient splits over selected regions only") {
  Tensor regions = Tensor::from_data({3, 1}, {3, 1, 2}, true);
  sum_all(weldon_pool(regions, {2, 1, 0.5})).backward();
  // Top 2 are rows 0 and 2 (weight 1/2 each); bottom 1 is row 1 (weight 0.5).
  CHECK(regions.grad() == std::vector<double>{0.5, 0.5, 0.5});
}

TEST_CASE("weldon_pool tie-break routes gradient to the lower region index") {
  Tensor regions = Tensor::from_data({3, 1}, {2, 2, 2}, true);
  sum_all(weldon_pool(regions, {1, 1, 1.0})).backward();
  // Max picks row 0, min also picks row 0.
  CHECK(regions.grad() == std::vector<double>{2, 0, 0});
}

TEST_CASE("triplet_loss reproduces hand values") {
  Tensor x = Tensor::from_data({2}, {1.0, 0.0});
  Tensor y = Tensor::from_data({2}, {0.5, std::sqrt(0.75)});
  Tensor z = Tensor::from_data({2}, {0.9, std::sqrt(0.19)});
  // alpha - x.y + x.z = 0.2 - 0.5 + 0.9
  CHECK(triplet_loss(x, y, z, 0.2).value() == doctest::Approx(0.6).epsilon(1e-12));
  // Margin satisfied: 0.2 - 0.9 + 0.5 < 0.
  CHECK(triplet_loss(x, z, y, 0.2).value() == 0.0);
  // Exactly at the boundary the hinge closes.
  CHECK(triplet_loss(x, y, y, 0.0).value() == 0.0);
}

TEST_CASE("triplet_loss rejects non-unit operands and bad alpha") {
  Tensor u = Tensor::from_data({2}, {1.0, 0.0});
  Tensor big = Tensor::from_data({2}, {2.0, 0.0});
  CHECK_THROWS_AS(triplet_loss(big, u, u, 0.2), Error);
  CHECK_THROWS_AS(triplet_loss(u, big, u, 0.2), Error);
  CHECK_THROWS_AS(triplet_loss(u, u, big, 0.2), Error);
  CHECK_THROWS_AS(triplet_loss(u, u, u, -0.1), Error);
  CHECK_THROWS_AS(triplet_loss(u, u, Tensor::from_data({3}, {1, 0, 0}), 0.2), Error);
}

TEST_CASE("mine_hard_negative matches a brute-force oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor anchor = rand_tensor({5}, rng);
    std::vector<Tensor> cands;
    for (int i = 0; i < 8; ++i) cands.push_back(rand_tensor({5}, rng));
    std::vector<std::size_t> forbidden{static_cast<std::size_t>(trial % 8)};

    double best_cos = -2.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i == forbidden[0]) continue;
      double d = 0, na = 0, nc = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        d += anchor.at(j) * cands[i].at(j);
        na += anchor.at(j) * anchor.at(j);
        nc += cands[i].at(j) * cands[i].at(j);
      }
      double cos = d / (std::sqrt(na) * std::sqrt(nc));
      if (cos > best_cos) {
        best_cos = cos;
        best = i;
      }
    }
    CHECK(mine_hard_negative(anchor, cands, forbidden) == best);
  }
}

TEST_CASE("mine_hard_negative tie-break and eligibility") {
  Tensor anchor = Tensor::from_data({2}, {1, 0});
  Tensor same1 = Tensor::from_data({2}, {2, 0});  // cosine 1
  Tensor same2 = Tensor::from_data({2}, {3, 0});  // cosine 1
  Tensor off = Tensor::from_data({2}, {0, 1});
  CHECK(mine_hard_negative(anchor, {off, same1, same2}, {}) == 1);
  CHECK(mine_hard_negative(anchor, {off, same1, same2}, {1}) == 2);
  CHECK_THROWS_AS(mine_hard_negative(anchor, {off}, {0}), Error);
  CHECK_THROWS_AS(mine_hard_negative(anchor, {}, {}), Error);
}

TEST_CASE("encoders produce unit-norm deterministic embeddings") {
  TextPathParams text = TextPathParams::init(12, 8, 6, 3);
  std::vector<std::size_t> tokens{4, 2, 7, 2};
  Tensor a = encode_text(tokens, text);
  Tensor b = encode_text(tokens, text);
  CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.data() == b.data());

  // Word order reaches the recurrence, so a permuted caption moves.
  Tensor c = encode_text({2, 7, 2, 4}, text);
  CHECK(a.data() != c.data());

  ImagePathParams image = ImagePathParams::init(5, 6, {2, 2, 0.7}, 3);
  Rng rng(8);
  Tensor img = encode_image(rand_tensor({7, 5}, rng), image);
  CHECK(norm(img) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("encode_text enforces length bounds") {
  TextPathParams text = TextPathParams::init(12, 8, 6, 3);
  CHECK_THROWS_AS(encode_text({}, text), Error);
  CHECK_THROWS_AS(encode_text({1, 2, 3}, text, 2), Error);
  CHECK_THROWS_AS(encode_text({12}, text), Error);  // id out of vocab
}

TEST_CASE("init is independent of parameter construction order") {
  TextPathParams a = TextPathParams::init(12, 8, 6, 3);
  ImagePathParams img = ImagePathParams::init(5, 6, {2, 2, 0.7}, 3);
  TextPathParams b = TextPathParams::init(12, 8, 6, 3);
  (void)img;
  CHECK(a.w_f.data() == b.w_f.data());
  CHECK(a.token_table.data() == b.token_table.data());
}

TEST_CASE("train_embedding drives the in-batch loss down") {
  // Each pair gets its own lit image channel and its own caption token, so
  // every in-batch negative differs from the positive and the hinge is fully
  // separable.
  Rng rng(17);
  const std::size_t n = 12;
  std::vector<EmbedPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    EmbedPair p;
    p.text = {2 + i % 2, 4 + i};
    std::vector<double> regions(4 * n);
    for (double& v : regions) v = 0.05 * rng.normal(0.0, 1.0);
    for (int r = 0; r < 4; ++r) regions[r * n + i] += 2.0;
    p.regions = Tensor::from_data({4, n}, std::move(regions));
    pairs.push_back(std::move(p));
  }

  EmbedModel model = EmbedModel::init(4 + n, 8, 8, n, {2, 1, 0.5}, 11);
  EmbedTrainOptions opt;
  opt.epochs = 30;
  opt.batch_size = 8;
  opt.seed = 11;
  opt.adam.lr = 0.02;
  std::vector<double> losses = train_embedding(model, pairs, opt);
  REQUIRE(losses.size() == 30);
  CHECK(losses.back() < losses.front());
  CHECK(losses.back() < 0.1);

  // Same seed, same data: the run is reproducible.
  EmbedModel model2 = EmbedModel::init(4 + n, 8, 8, n, {2, 1, 0.5}, 11);
  std::vector<double> losses2 = train_embedding(model2, pairs, opt);
  CHECK(losses == losses2);
  CHECK(model.text.proj_w.data() == model2.text.proj_w.data());
}

TEST_CASE("train_embedding validates inputs") {
  EmbedModel model = EmbedModel::init(4, 6, 4, 3, {1, 1, 1.0}, 1);
  EmbedTrainOptions opt;
  CHECK_THROWS_AS(train_embedding(model, {}, opt), Error);
  opt.batch_size = 1;
  EmbedPair p;
  p.text = {2};
  p.regions = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(train_embedding(model, {p, p}, opt), Error);
}
