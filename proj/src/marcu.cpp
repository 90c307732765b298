// SPDX-License-Identifier: Apache-2.0
#include "agenet/marcu.hpp"

#include <stdexcept>

#include "agenet/ops.hpp"
#include "agenet/parameters.hpp"

namespace agenet {

void MarcuBlockConfig::validate() const {
  if (in_channels == 0) throw std::invalid_argument("marcu block: in_channels must be positive");
  if (out_channels == 0 || out_channels % 4 != 0) {
    throw std::invalid_argument("marcu block: out_channels " + std::to_string(out_channels) +
                                " is not divisible by 4");
  }
  if (stride != 1 && stride != 2) {
    throw std::invalid_argument("marcu block: stride must be 1 or 2, got " +
                                std::to_string(stride));
  }
  if (attention_kernel != 3 && attention_kernel != 5) {
    throw std::invalid_argument("marcu block: attention kernel must be 3 or 5, got " +
                                std::to_string(attention_kernel));
  }
}

std::size_t attention_kernel_rule(std::size_t channels, std::size_t threshold) {
  if (channels == 0) throw std::invalid_argument("attention kernel rule: zero channels");
  return channels <= threshold ? 3 : 5;
}

std::array<std::size_t, 3> branch_widths(std::size_t out_channels) {
  if (out_channels == 0 || out_channels % 4 != 0) {
    throw std::invalid_argument("multi-scale conv: " + std::to_string(out_channels) +
                                " output channels cannot be split 1/4, 1/2, 1/4");
  }
  return {out_channels / 4, out_channels / 2, out_channels / 4};
}

NetworkConfig NetworkConfig::standard() {
  NetworkConfig c;
  c.name = "standard";
  return c;
}

NetworkConfig NetworkConfig::desk() {
  NetworkConfig c;
  c.name = "desk";
  c.input_resolution = 64;
  c.stem_kernel = 3;
  c.stem_channels = 16;
  c.stem_stride = 1;
  c.pool_kernel = 2;
  c.pool_stride = 2;
  c.pool_padding = 0;
  c.stage_blocks = {1, 1, 1, 1};
  c.stage_channels = {16, 32, 64, 128};
  return c;
}

NetworkConfig NetworkConfig::preset(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "desk") return desk();
  throw std::invalid_argument("unknown network preset '" + name + "' (expected standard or desk)");
}

void NetworkConfig::validate() const {
  if (stem_kernel % 2 == 0) throw std::invalid_argument("network: stem kernel must be odd");
  if (stem_channels == 0 || input_channels == 0) {
    throw std::invalid_argument("network: channel counts must be positive");
  }
  if (stem_stride == 0 || pool_stride == 0 || pool_kernel == 0) {
    throw std::invalid_argument("network: strides and pool kernel must be positive");
  }
  for (std::size_t s = 0; s < 4; ++s) {
    if (stage_blocks[s] == 0) throw std::invalid_argument("network: every stage needs a block");
    if (stage_channels[s] == 0 || stage_channels[s] % 4 != 0) {
      throw std::invalid_argument("network: stage " + std::to_string(s + 1) + " channels " +
                                  std::to_string(stage_channels[s]) + " not divisible by 4");
    }
  }
}

std::vector<std::size_t> backbone_shape_trace(const NetworkConfig& cfg, std::size_t input_size) {
  cfg.validate();
  auto out = [](std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    if (in + 2 * p < k) throw std::invalid_argument("network: input too small for the layer plan");
    return (in + 2 * p - k) / s + 1;
  };
  std::vector<std::size_t> trace;
  std::size_t size = out(input_size, cfg.stem_kernel, cfg.stem_stride, cfg.stem_kernel / 2);
  trace.push_back(size);
  size = out(size, cfg.pool_kernel, cfg.pool_stride, cfg.pool_padding);
  trace.push_back(size);
  for (std::size_t s = 0; s < 4; ++s) {
    // The 5x5 branch of the first block is the tightest constraint (padding 2).
    const std::size_t stride = s == 0 ? 1 : 2;
    size = out(size, 5, stride, 2);
    trace.push_back(size);
  }
  return trace;
}

LayerCounts layer_counts(const NetworkConfig& cfg) {
  cfg.validate();
  LayerCounts c;
  std::size_t in = cfg.stem_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    c.blocks += cfg.stage_blocks[s];
    for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      c.conv2d_kernels += 3;
      if (stride != 1 || in != cfg.stage_channels[s]) ++c.conv2d_kernels;
      in = cfg.stage_channels[s];
    }
  }
  c.conv2d_kernels += 1;
  c.weighted_layers = 1 + c.blocks;
  c.table_rows = c.weighted_layers + 1;
  c.with_attention = 1 + 2 * c.blocks;
  return c;
}

Var multi_scale_conv(Var input, Var w1, Var b1, Var w3, Var b3, Var w5, Var b5,
                     std::size_t stride) {
  Var y1 = ops::conv2d(input, w1, b1, stride, 0);
  Var y3 = ops::conv2d(input, w3, b3, stride, 1);
  Var y5 = ops::conv2d(input, w5, b5, stride, 2);
  return ops::relu(ops::concat({y1, y3, y5}));
}

Var eca_attention(Var input, Var kernel) {
  Var pooled = ops::global_avg_pool(input);
  Var weights = ops::sigmoid(ops::conv1d(pooled, kernel));
  return ops::mul_channel_broadcast(input, weights);
}

MarcuBlock::MarcuBlock(ParameterSet& params, const std::string& prefix,
                       const MarcuBlockConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  const auto widths = branch_widths(cfg_.out_channels);
  constexpr std::array<std::size_t, 3> kSizes{1, 3, 5};
  constexpr std::array<const char*, 3> kNames{"branch1x1", "branch3x3", "branch5x5"};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string base = prefix + "." + kNames[i];
    branch_w_[i] =
        &params.create(base + ".weight", {widths[i], cfg_.in_channels, kSizes[i], kSizes[i]});
    branch_b_[i] = &params.create(base + ".bias", {widths[i]});
  }
  attention_ = &params.create(prefix + ".attention.kernel", {cfg_.attention_kernel});
  if (cfg_.stride != 1 || cfg_.in_channels != cfg_.out_channels) {
    shortcut_w_ = &params.create(prefix + ".shortcut.weight",
                                 {cfg_.out_channels, cfg_.in_channels, 1, 1});
    shortcut_b_ = &params.create(prefix + ".shortcut.bias", {cfg_.out_channels});
  }
}

void MarcuBlock::initialize(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = branch_w_[i]->value.shape();
    init_uniform_fan_in(branch_w_[i]->value, s[1] * s[2] * s[3], rng);
    branch_b_[i]->value.fill(0.0);
  }
  init_uniform_fan_in(attention_->value, cfg_.attention_kernel, rng);
  if (shortcut_w_ != nullptr) {
    init_uniform_fan_in(shortcut_w_->value, cfg_.in_channels, rng);
    shortcut_b_->value.fill(0.0);
  }
}

Var MarcuBlock::multi_scale(Tape& tape, Var x) const {
  return multi_scale_conv(x, tape.parameter(*branch_w_[0]), tape.parameter(*branch_b_[0]),
                          tape.parameter(*branch_w_[1]), tape.parameter(*branch_b_[1]),
                          tape.parameter(*branch_w_[2]), tape.parameter(*branch_b_[2]),
                          cfg_.stride);
}

Var MarcuBlock::forward(Tape& tape, Var x) const {
  Var attended = eca_attention(multi_scale(tape, x), tape.parameter(*attention_));
  Var shortcut = x;
  if (shortcut_w_ != nullptr) {
    shortcut = ops::conv2d(x, tape.parameter(*shortcut_w_), tape.parameter(*shortcut_b_),
                           cfg_.stride, 0);
  }
  return ops::relu(ops::add(attended, shortcut));
}

Backbone::Backbone(ParameterSet& params, const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  stem_w_ = &params.create("stem.weight", {cfg_.stem_channels, cfg_.input_channels,
                                           cfg_.stem_kernel, cfg_.stem_kernel});
  stem_b_ = &params.create("stem.bias", {cfg_.stem_channels});
  std::size_t in = cfg_.stem_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < cfg_.stage_blocks[s]; ++b) {
      MarcuBlockConfig bc;
      bc.in_channels = in;
      bc.out_channels = cfg_.stage_channels[s];
      bc.stride = (s > 0 && b == 0) ? 2 : 1;
      bc.attention_kernel = attention_kernel_rule(bc.out_channels, cfg_.attention_threshold);
      blocks_.emplace_back(params,
                           "stage" + std::to_string(s + 1) + ".block" + std::to_string(b), bc);
      in = bc.out_channels;
    }
    stage_end_[s] = blocks_.size();
  }
}

void Backbone::initialize(std::mt19937_64& rng) {
  init_uniform_fan_in(stem_w_->value, cfg_.input_channels * cfg_.stem_kernel * cfg_.stem_kernel,
                      rng);
  stem_b_->value.fill(0.0);
  for (auto& b : blocks_) b.initialize(rng);
}

Var Backbone::forward(Tape& tape, Var images, std::vector<std::size_t>* trace) const {
  Var x = ops::relu(ops::conv2d(images, tape.parameter(*stem_w_), tape.parameter(*stem_b_),
                                cfg_.stem_stride, cfg_.stem_kernel / 2));
  if (trace != nullptr) trace->push_back(x.shape()[2]);
  x = ops::maxpool2d(x, cfg_.pool_kernel, cfg_.pool_stride, cfg_.pool_padding);
  if (trace != nullptr) trace->push_back(x.shape()[2]);
  std::size_t next = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    for (; next < stage_end_[s]; ++next) x = blocks_[next].forward(tape, x);
    if (trace != nullptr) trace->push_back(x.shape()[2]);
  }
  return ops::global_avg_pool(x);
}

}  // namespace agenet
