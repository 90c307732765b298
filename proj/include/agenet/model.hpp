// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "agenet/attribute_head.hpp"
#include "agenet/marcu.hpp"
#include "agenet/ranking.hpp"

namespace agenet {

struct ModelConfig {
  NetworkConfig network = NetworkConfig::desk();
  AttributeSchema schema = AttributeSchema::morph();
  HeadConfig head;
  LossKind loss = LossKind::Ecr;
};

struct ModelOutput {
  Var features;
  HeadOutput head;
};

/// Backbone + attribute-guided head. Owns its parameters.
class AgeNet {
 public:
  explicit AgeNet(const ModelConfig& cfg);

  AgeNet(const AgeNet&) = delete;
  AgeNet& operator=(const AgeNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const IntervalPoints& points() const { return points_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const Backbone& backbone() const { return *backbone_; }
  const AttributeHead& head() const { return *head_; }

  /// Seeded initialisation. The age output bias starts at the centre of the age
  /// range for scalar-output losses, 0 for the classification head.
  void initialize(std::uint64_t seed);

  ModelOutput forward(Tape& tape, const Tensor& images) const;

  /// Decoded ages for a batch (no gradient bookkeeping is kept).
  std::vector<double> predict(const Tensor& images) const;

 private:
  ModelConfig cfg_;
  IntervalPoints points_;
  ParameterSet params_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<AttributeHead> head_;
};

}  // namespace agenet
