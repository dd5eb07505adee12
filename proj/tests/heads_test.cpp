#include <doctest.h>

#include <cmath>
#include <vector>

#include "visaw/errors.hpp"
#include "visaw/heads.hpp"
#include "visaw/ops.hpp"
#include "visaw/rng.hpp"

using namespace visaw;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng) {
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.normal(0.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("tag head produces one distribution per token") {
  TagHeadParams p = TagHeadParams::init(8, 4, 2);
  Rng rng(1);
  Tensor fused = rand_tensor({5, 8}, rng);
  Tensor dist = tag_distribution(fused, p);
  CHECK(dist.shape() == Shape{5, 4});
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) s += dist.at(r * 4 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(tag_logits(rand_tensor({5, 6}, rng), p), Error);
}

TEST_CASE("zero tag weights give a uniform distribution") {
  TagHeadParams p = TagHeadParams::init(8, 4, 2);
  p.w = Tensor::zeros({8, 4});
  p.b = Tensor::zeros({4});
  Rng rng(2);
  Tensor dist = tag_distribution(rand_tensor({3, 8}, rng), p);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    CHECK(dist.at(i) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("pair feature layout is [p; h; |p-h|; p*h] of the mean rows") {
  Tensor fp = Tensor::from_data({2, 2}, {1, 2, 3, 4});  // means {2, 3}
  Tensor fh = Tensor::from_data({1, 2}, {5, 1});        // means {5, 1}
  Tensor feat = pair_feature(fp, fh);
  CHECK(feat.shape() == Shape{8});
  CHECK(feat.data() == std::vector<double>{2, 3, 5, 1, 3, 2, 10, 3});
}

TEST_CASE("identical pair inputs zero the difference block") {
  Rng rng(3);
  Tensor f = rand_tensor({4, 6}, rng);
  Tensor feat = pair_feature(f, f);
  for (std::size_t i = 12; i < 18; ++i) CHECK(feat.at(i) == 0.0);
}

TEST_CASE("classify_pair is a proper distribution") {
  PairHeadParams p = PairHeadParams::init(8, 3, 4);
  Rng rng(4);
  Tensor probs = classify_pair(rand_tensor({3, 8}, rng), rand_tensor({5, 8}, rng), p);
  CHECK(probs.shape() == Shape{3});
  double s = probs.at(0) + probs.at(1) + probs.at(2);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(pair_logits(rand_tensor({3, 4}, rng), rand_tensor({3, 8}, rng), p), Error);
}

TEST_CASE("decoder logits shape and bounds") {
  DecoderParams p = DecoderParams::init(9, 8, 2, 16, 6, 5);
  Rng rng(5);
  Tensor src = rand_tensor({4, 8}, rng);
  Tensor logits = decoder_logits({0, 3, 5}, src, p);
  CHECK(logits.shape() == Shape{3, 9});
  CHECK_THROWS_AS(decoder_logits({}, src, p), Error);
  CHECK_THROWS_AS(decoder_logits({0, 1, 2, 3, 4, 5, 6}, src, p), Error);
  CHECK_THROWS_AS(decoder_logits({0}, rand_tensor({4, 6}, rng), p), Error);
}

TEST_CASE("causal masking keeps early logits fixed when the future changes") {
  DecoderParams p = DecoderParams::init(9, 8, 2, 16, 6, 5);
  Rng rng(6);
  Tensor src = rand_tensor({4, 8}, rng);
  Tensor a = decoder_logits({0, 3, 5}, src, p);
  Tensor b = decoder_logits({0, 3, 7}, src, p);
  // Positions 0 and 1 only see the prefix up to themselves.
  for (std::size_t i = 0; i < 2 * 9; ++i) {
    CHECK(a.at(i) == doctest::Approx(b.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("greedy decode stops at eos and reports truncation") {
  DecoderParams p = DecoderParams::init(9, 8, 2, 16, 6, 5);
  Rng rng(7);
  Tensor src = rand_tensor({4, 8}, rng);

  // Bias the output layer so EOS (id 1) always wins: decode is empty.
  DecoderParams forced = p;
  forced.out_b = Tensor::from_data({9}, {0, 1e6, 0, 0, 0, 0, 0, 0, 0});
  DecodeResult empty = greedy_decode(src, forced, 0, 1, 6);
  CHECK(empty.tokens.empty());
  CHECK_FALSE(empty.truncated);

  // Bias token 4 instead: EOS never comes, so the cap trips.
  forced.out_b = Tensor::from_data({9}, {0, 0, 0, 0, 1e6, 0, 0, 0, 0});
  DecodeResult capped = greedy_decode(src, forced, 0, 1, 3);
  CHECK(capped.tokens == std::vector<std::size_t>{4, 4, 4});
  CHECK(capped.truncated);

  // Decoding twice from the same state is identical.
  DecodeResult r1 = greedy_decode(src, p, 0, 1, 5);
  DecodeResult r2 = greedy_decode(src, p, 0, 1, 5);
  CHECK(r1.tokens == r2.tokens);
  CHECK(r1.truncated == r2.truncated);
}

TEST_CASE("greedy decode ties pick the lowest token id") {
  DecoderParams p = DecoderParams::init(9, 8, 2, 16, 6, 5);
  Rng rng(8);
  Tensor src = rand_tensor({4, 8}, rng);
  // Flatten all logits to exact ties; id 0 wins over EOS id 1.
  p.out_w = Tensor::zeros({8, 9});
  p.out_b = Tensor::zeros({9});
  DecodeResult r = greedy_decode(src, p, 0, 1, 4);
  CHECK(r.tokens == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK(r.truncated);
}
