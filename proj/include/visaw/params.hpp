#pragma once

#include <string>
#include <vector>

#include "visaw/rng.hpp"
#include "visaw/tensor.hpp"

namespace visaw {

// A model's trainable state is a flat, ordered list of named tensors. The
// order is the serialization order, so params() methods must be stable.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

void zero_grads(ParamList& params);
void append_params(ParamList& out, const ParamList& extra);

// Initializers. Every tensor gets its own RNG stream derived from
// (seed, name), so init values are independent of construction order.
Tensor xavier_uniform(Shape shape, std::uint64_t seed, const std::string& name);
Tensor normal_init(Shape shape, double stddev, std::uint64_t seed, const std::string& name);
Tensor zeros_param(Shape shape);
Tensor ones_param(Shape shape);

}  // namespace visaw
