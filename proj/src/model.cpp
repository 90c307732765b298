// SPDX-License-Identifier: Apache-2.0
#include "agenet/model.hpp"

#include <random>
#include <stdexcept>

namespace agenet {

AgeNet::AgeNet(const ModelConfig& cfg)
    : cfg_(cfg), points_(make_interval_points(cfg.schema.a_min, cfg.schema.a_max)) {
  backbone_ = std::make_unique<Backbone>(params_, cfg_.network);
  head_ = std::make_unique<AttributeHead>(params_, cfg_.network.feature_dim(), cfg_.schema,
                                          cfg_.head, age_output_width(cfg_.loss, points_));
}

void AgeNet::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  backbone_->initialize(rng);
  const double centre =
      cfg_.loss == LossKind::MulticlassCe ? 0.0 : 0.5 * (points_.a_min + points_.a_max);
  head_->initialize(rng, centre);
}

ModelOutput AgeNet::forward(Tape& tape, const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != cfg_.network.input_channels) {
    throw ShapeError("model: expected images [N," + std::to_string(cfg_.network.input_channels) +
                     ",H,W], got " + shape_string(images.shape()));
  }
  ModelOutput out;
  out.features = backbone_->forward(tape, tape.constant(images));
  out.head = head_->forward(tape, out.features);
  return out;
}

std::vector<double> AgeNet::predict(const Tensor& images) const {
  Tape tape;
  const ModelOutput out = forward(tape, images);
  return predict_ages(cfg_.loss, out.head.age_output.value(), points_);
}

}  // namespace agenet
