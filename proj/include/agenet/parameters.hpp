// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "agenet/tensor.hpp"

namespace agenet {

/// A named, persistent trainable tensor. `grad` is accumulated by Tape::backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

/// Ordered registry of parameters. Addresses are stable for the lifetime of the set.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers a zero-initialised parameter. Duplicate names are rejected.
  Parameter& create(const std::string& name, Shape shape);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) fill.
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace agenet
