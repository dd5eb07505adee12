#include <doctest.h>

#include "visaw/gradcheck.hpp"
#include "visaw/ops.hpp"

using namespace visaw;

TEST_CASE("grad_check accepts a correct gradient") {
  Tensor x = Tensor::from_data({3}, {0.3, -1.2, 0.7}, true);
  auto fn = [](const std::vector<Tensor>& in) { return dot(in[0], in[0]); };
  GradCheckReport r = grad_check("quadratic", fn, {x}, 1e-6);
  CHECK(r.pass);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("grad_check flags a wrong gradient") {
  Tensor x = Tensor::from_data({2}, {0.5, -0.4}, true);
  // Loss reads the data but routes the graph through a scaled copy, so the
  // analytic gradient is 2x while the loss behaves like sum(3 * x * x).
  auto fn = [](const std::vector<Tensor>& in) {
    Tensor wrong = scale(mul(in[0], in[0].detach()), 3.0);
    return sum_all(wrong);
  };
  GradCheckReport r = grad_check("mismatch", fn, {x}, 1e-6);
  CHECK_FALSE(r.pass);
}

TEST_CASE("suite passes at a seed other than the acceptance one") {
  bool all = true;
  double worst = 0.0;
  for (const GradCheckReport& r : gradcheck_suite(12345)) {
    all = all && r.pass;
    worst = std::max(worst, r.max_rel_err);
  }
  CHECK(all);
  CHECK(worst < 1e-4);
}
