// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "agenet/autodiff.hpp"

// Multi-scale attentional residual convolution unit (MARCU) and the four-stage
// backbone built from it.

namespace agenet {

struct MarcuBlockConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  std::size_t attention_kernel = 3;

  /// out_channels % 4 == 0, stride in {1,2}, attention_kernel in {3,5}.
  void validate() const;
};

/// 3 up to and including `threshold` channels (128 by default), 5 above.
std::size_t attention_kernel_rule(std::size_t channels, std::size_t threshold = 128);

/// Output channels of the (1x1, 3x3, 5x5) branches: (C/4, C/2, C/4).
std::array<std::size_t, 3> branch_widths(std::size_t out_channels);

struct NetworkConfig {
  std::string name;
  std::size_t input_channels = 3;
  std::size_t input_resolution = 224;
  std::size_t stem_kernel = 7;
  std::size_t stem_channels = 64;
  std::size_t stem_stride = 2;
  std::size_t pool_kernel = 3;
  std::size_t pool_stride = 2;
  std::size_t pool_padding = 1;
  std::array<std::size_t, 4> stage_blocks{6, 8, 12, 6};
  std::array<std::size_t, 4> stage_channels{64, 128, 256, 512};
  std::size_t attention_threshold = 128;

  /// 224 input, 7x7/64/2 stem, 3x3/2 pool, [6,8,12,6] blocks, [64,128,256,512] channels.
  static NetworkConfig standard();
  /// 64 input, 3x3/16/1 stem, 2x2/2 pool, [1,1,1,1] blocks, [16,32,64,128] channels.
  static NetworkConfig desk();
  /// "standard" or "desk".
  static NetworkConfig preset(const std::string& name);

  std::size_t feature_dim() const { return stage_channels[3]; }
  void validate() const;
};

/// Spatial size after the stem, the pool, and each of the four stages.
std::vector<std::size_t> backbone_shape_trace(const NetworkConfig& cfg, std::size_t input_size);

struct LayerCounts {
  std::size_t blocks = 0;
  /// Stem + one per MARCU block.
  std::size_t weighted_layers = 0;
  /// weighted_layers + the pooling row: the row count of the layer table.
  std::size_t table_rows = 0;
  /// Stem + two per block (multi-scale convolution and attention convolution).
  std::size_t with_attention = 0;
  /// Every conv2d kernel tensor, including branches and projection shortcuts.
  std::size_t conv2d_kernels = 0;
};

LayerCounts layer_counts(const NetworkConfig& cfg);

/// Differentiable pieces of the block, usable with any parameter source.
Var multi_scale_conv(Var input, Var w1, Var b1, Var w3, Var b3, Var w5, Var b5,
                     std::size_t stride);
/// global_avg_pool -> conv1d over channels -> sigmoid -> channel-wise rescale of `input`.
Var eca_attention(Var input, Var kernel);

class MarcuBlock {
 public:
  MarcuBlock(ParameterSet& params, const std::string& prefix, const MarcuBlockConfig& cfg);

  const MarcuBlockConfig& config() const { return cfg_; }
  bool has_projection() const { return shortcut_w_ != nullptr; }

  void initialize(std::mt19937_64& rng);

  /// ReLU(eca(multi_scale(x)) + shortcut(x)).
  Var forward(Tape& tape, Var x) const;
  Var multi_scale(Tape& tape, Var x) const;

 private:
  MarcuBlockConfig cfg_;
  std::array<Parameter*, 3> branch_w_{};
  std::array<Parameter*, 3> branch_b_{};
  Parameter* attention_ = nullptr;
  Parameter* shortcut_w_ = nullptr;
  Parameter* shortcut_b_ = nullptr;
};

class Backbone {
 public:
  Backbone(ParameterSet& params, const NetworkConfig& cfg);

  const NetworkConfig& config() const { return cfg_; }
  const std::vector<MarcuBlock>& blocks() const { return blocks_; }

  void initialize(std::mt19937_64& rng);

  /// Images [N, C, H, W] -> pooled features [N, feature_dim]. When `trace` is given it
  /// receives the spatial size after the stem, the pool, and each stage.
  Var forward(Tape& tape, Var images, std::vector<std::size_t>* trace = nullptr) const;

 private:
  NetworkConfig cfg_;
  Parameter* stem_w_ = nullptr;
  Parameter* stem_b_ = nullptr;
  std::vector<MarcuBlock> blocks_;
  std::array<std::size_t, 4> stage_end_{};
};

}  // namespace agenet
