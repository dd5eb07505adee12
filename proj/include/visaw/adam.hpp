#pragma once

#include <vector>

#include "visaw/params.hpp"

namespace visaw {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are keyed by position in the param
// list, which therefore must not change between steps.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // Applies one update in place from each parameter's accumulated grad.
  // Gradients are left untouched; callers decide when to reset them.
  void step(ParamList& params);

  long step_count() const { return step_count_; }

 private:
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace visaw
