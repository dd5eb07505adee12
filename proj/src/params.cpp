#include "visaw/params.hpp"

#include <cmath>

namespace visaw {

void zero_grads(ParamList& params) {
  for (NamedParam& p : params) p.tensor.zero_grad();
}

void append_params(ParamList& out, const ParamList& extra) {
  out.insert(out.end(), extra.begin(), extra.end());
}

Tensor xavier_uniform(Shape shape, std::uint64_t seed, const std::string& name) {
  // Fan-in/fan-out from the first and last axis; rank-1 degrades to fan = n.
  std::size_t fan_in = shape.front();
  std::size_t fan_out = shape.back();
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng = Rng::for_name(seed, name);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor normal_init(Shape shape, double stddev, std::uint64_t seed, const std::string& name) {
  Rng rng = Rng::for_name(seed, name);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.normal(0.0, stddev);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace visaw
