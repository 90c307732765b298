// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "agenet/parameters.hpp"

namespace agenet {

struct AdamOptions {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are created on the first step and keyed by
/// parameter position in the set, so the set must not change between steps.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Updates every trainable parameter from its accumulated grad.
  void step(ParameterSet& params);

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

}  // namespace agenet
