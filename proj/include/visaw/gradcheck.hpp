#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "visaw/tensor.hpp"

namespace visaw {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Builds a scalar loss from the given inputs. Called repeatedly with the
// same tensors while their data is perturbed, so it must not cache.
using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Central-difference check of d(loss)/d(input) for every input that
// requires grad. Error metric per coordinate: |analytic - numeric| /
// max(|analytic|, |numeric|, 1), i.e. relative for large gradients and
// absolute below magnitude 1, where finite differences are noise-bound.
// `max_coords` > 0 checks a seeded random subset per input instead of all.
GradCheckReport grad_check(const std::string& name, const LossFn& fn,
                           const std::vector<Tensor>& inputs, double tolerance,
                           double step = 1e-5, std::size_t max_coords = 0,
                           std::uint64_t coord_seed = 0);

// Runs every registered op plus the composed model stacks at several random
// points each. Used by the gradcheck CLI stage and by the acceptance suite.
std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed);

}  // namespace visaw
