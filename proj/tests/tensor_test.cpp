#include <doctest.h>

#include "visaw/errors.hpp"
#include "visaw/ops.hpp"
#include "visaw/tensor.hpp"

using namespace visaw;

TEST_CASE("construction and accessors") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.shape() == Shape{2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.last_dim() == 3);
  CHECK(t.at(4) == 5.0);
  CHECK_FALSE(t.requires_grad());

  Tensor z = Tensor::zeros({3});
  CHECK(z.data() == std::vector<double>{0, 0, 0});
  Tensor f = Tensor::full({2}, 1.5);
  CHECK(f.data() == std::vector<double>{1.5, 1.5});
  Tensor s = Tensor::scalar(4.0);
  CHECK(s.value() == 4.0);
  Tensor eye = Tensor::identity(2);
  CHECK(eye.data() == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("construction rejects bad shapes") {
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(Tensor::from_data({2, 0}, {}), Error);
}

TEST_CASE("value() requires a scalar") {
  Tensor t = Tensor::from_data({2}, {1, 2});
  CHECK_THROWS_AS(t.value(), Error);
}

TEST_CASE("quadratic gradient") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor loss = mul(x, x);
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("sum gradient is all ones") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  sum_all(x).backward();
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("repeated backward accumulates additively") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x);
  Tensor loss = mul(y, Tensor::scalar(2.0));
  loss.backward();
  std::vector<double> once = x.grad();
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0 * once[0]).epsilon(1e-12));
}

TEST_CASE("grads accumulate across separate losses until reset") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  sum_all(x).backward();
  dot(x, x).backward();
  CHECK(x.grad()[0] == doctest::Approx(1.0 + 2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(1.0 + 4.0).epsilon(1e-12));
  x.zero_grad();
  CHECK(x.grad() == std::vector<double>{0, 0});
}

TEST_CASE("unreachable tensors keep zero grads") {
  Tensor used = Tensor::scalar(2.0, true);
  Tensor unused = Tensor::from_data({2}, {5, 6}, true);
  mul(used, used).backward();
  CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = add(x, x);
  CHECK_THROWS_AS(y.backward(), Error);
}

TEST_CASE("detach cuts the graph") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor d = mul(x, x).detach();
  CHECK_FALSE(d.requires_grad());
  mul(d, d).backward();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard suppresses graph construction") {
  Tensor x = Tensor::scalar(2.0, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
}

TEST_CASE("op results refuse requires_grad toggling") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(y.set_requires_grad(true), Error);
}

TEST_CASE("diamond reuse counts both paths") {
  // loss = x*x + x*x; d/dx = 4x
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x);
  add(y, y).backward();
  CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("shape_str formats like [2x3]") {
  CHECK(shape_str({2, 3}) == "[2x3]");
  CHECK(shape_str({}) == "[]");
}
