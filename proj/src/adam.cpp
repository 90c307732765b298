// SPDX-License-Identifier: Apache-2.0
#include "agenet/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace agenet {

void Adam::step(ParameterSet& params) {
  if (first_moment_.empty()) {
    for (const auto& p : params) {
      first_moment_.emplace_back(p->value.shape());
      second_moment_.emplace_back(p->value.shape());
    }
  }
  if (first_moment_.size() != params.size()) {
    throw std::logic_error("adam: parameter set changed between steps");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(options_.beta1, t);
  const double bias2 = 1.0 - std::pow(options_.beta2, t);
  std::size_t slot = 0;
  for (auto& p : params) {
    Tensor& m = first_moment_[slot];
    Tensor& v = second_moment_[slot];
    ++slot;
    if (!p->trainable) continue;
    if (p->grad.shape() != p->value.shape()) {
      throw std::logic_error("adam: grad/value shape mismatch for " + p->name);
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p->value[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace agenet
