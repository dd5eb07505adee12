#include "visaw/adam.hpp"

#include <cmath>

#include "visaw/errors.hpp"

namespace visaw {

void Adam::step(ParamList& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].tensor.size(), 0.0);
      v_[i].assign(params[i].tensor.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    fail(ErrorKind::Contract, "adam: parameter list changed size between steps");
  }

  ++step_count_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    NamedParam& p = params[i];
    const std::vector<double>& g = p.tensor.grad();
    std::vector<double>& w = p.tensor.data();
    if (g.size() != w.size()) {
      fail(ErrorKind::Contract, "adam: grad/param size mismatch for " + p.name);
    }
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!std::isfinite(g[j])) {
        fail(ErrorKind::Numeric, "adam: non-finite gradient in " + p.name);
      }
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double mhat = m[j] / c1;
      double vhat = v[j] / c2;
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace visaw
