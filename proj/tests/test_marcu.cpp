// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "agenet/marcu.hpp"
#include "agenet/ops.hpp"

using namespace agenet;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(rng);
  return t;
}

}  // namespace

TEST(Marcu, BranchWidths) {
  EXPECT_EQ(branch_widths(64), (std::array<std::size_t, 3>{16, 32, 16}));
  EXPECT_EQ(branch_widths(512), (std::array<std::size_t, 3>{128, 256, 128}));
  EXPECT_THROW(branch_widths(30), std::invalid_argument);
}

TEST(Marcu, AttentionKernelRule) {
  EXPECT_EQ(attention_kernel_rule(64), 3u);
  EXPECT_EQ(attention_kernel_rule(128), 3u);
  EXPECT_EQ(attention_kernel_rule(256), 5u);
  EXPECT_EQ(attention_kernel_rule(512), 5u);
  EXPECT_THROW(attention_kernel_rule(0), std::invalid_argument);
}

TEST(Marcu, BlockConfigValidation) {
  EXPECT_NO_THROW((MarcuBlockConfig{16, 32, 2, 3}.validate()));
  EXPECT_THROW((MarcuBlockConfig{16, 30, 1, 3}.validate()), std::invalid_argument);
  EXPECT_THROW((MarcuBlockConfig{16, 32, 3, 3}.validate()), std::invalid_argument);
  EXPECT_THROW((MarcuBlockConfig{16, 32, 1, 4}.validate()), std::invalid_argument);
}

TEST(Marcu, MultiScaleConcatenatesToOutputWidth) {
  Tape tape;
  ParameterSet ps;
  MarcuBlock block(ps, "b", {8, 64, 1, 3});
  std::mt19937_64 rng(1);
  block.initialize(rng);
  Var x = tape.constant(random_tensor({1, 8, 14, 14}, 2));
  Var y = block.multi_scale(tape, x);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 14, 14}));
  for (double v : y.value().values()) EXPECT_GE(v, 0.0);
}

TEST(Marcu, StrideTwoHalvesResolution) {
  Tape tape;
  ParameterSet ps;
  MarcuBlock block(ps, "b", {4, 8, 2, 3});
  std::mt19937_64 rng(1);
  block.initialize(rng);
  EXPECT_TRUE(block.has_projection());
  Var y = block.forward(tape, tape.constant(random_tensor({1, 4, 56, 56}, 3)));
  EXPECT_EQ(y.shape(), (Shape{1, 8, 28, 28}));
}

TEST(Marcu, SaturatedAttentionIsIdentity) {
  Tape tape;
  Var x = tape.constant(random_tensor({2, 5, 4, 4}, 4, 0.1, 1.0));
  Var k = tape.constant(Tensor({3}, std::vector<double>{0.0, 1e4, 0.0}));
  Var y = eca_attention(x, k);
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    EXPECT_NEAR(y.value()[i], x.value()[i], 1e-12);
  }
}

TEST(Marcu, AttentionWeightsStrictlyBetweenZeroAndOne) {
  // Rescaling a map of ones exposes the per-channel attention weights.
  Tape tape;
  Tensor ones({1, 6, 3, 3}, 1.0);
  Var k = tape.constant(random_tensor({5}, 6));
  Var y = eca_attention(tape.constant(ones), k);
  for (double v : y.value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Marcu, ZeroedBranchesLeaveReluOfProjection) {
  Tape tape;
  ParameterSet ps;
  MarcuBlock block(ps, "b", {3, 8, 2, 3});
  std::mt19937_64 rng(7);
  block.initialize(rng);
  for (auto name : {"b.branch1x1", "b.branch3x3", "b.branch5x5"}) {
    ps.at(std::string(name) + ".weight").value.fill(0.0);
    ps.at(std::string(name) + ".bias").value.fill(0.0);
  }
  const Tensor input = random_tensor({2, 3, 9, 9}, 8);
  Var x = tape.constant(input);
  Var y = block.forward(tape, x);
  Var proj = ops::relu(ops::conv2d(x, tape.constant(ps.at("b.shortcut.weight").value),
                                   tape.constant(ps.at("b.shortcut.bias").value), 2, 0));
  EXPECT_EQ(y.value(), proj.value());
}

TEST(Backbone, StandardTraceAndDepth) {
  const auto cfg = NetworkConfig::standard();
  EXPECT_EQ(backbone_shape_trace(cfg, 224), (std::vector<std::size_t>{112, 56, 56, 28, 14, 7}));
  EXPECT_EQ(cfg.feature_dim(), 512u);
  const auto counts = layer_counts(cfg);
  EXPECT_EQ(counts.blocks, 32u);
  EXPECT_EQ(counts.weighted_layers, 33u);
  EXPECT_EQ(counts.with_attention, 65u);
}

TEST(Backbone, StandardStageKernelsFollowRule) {
  ParameterSet ps;
  Backbone net(ps, NetworkConfig::standard());
  const std::size_t expected[] = {3, 3, 5, 5};
  std::size_t index = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < net.config().stage_blocks[s]; ++b, ++index) {
      const auto& c = net.blocks()[index].config();
      EXPECT_EQ(c.attention_kernel, expected[s]);
      EXPECT_EQ(c.stride, (s > 0 && b == 0) ? 2u : 1u);
    }
  }
}

TEST(Backbone, DeskForwardTrace) {
  ParameterSet ps;
  Backbone net(ps, NetworkConfig::desk());
  std::mt19937_64 rng(3);
  net.initialize(rng);
  Tape tape;
  std::vector<std::size_t> trace;
  Var f = net.forward(tape, tape.constant(random_tensor({2, 3, 64, 64}, 9, 0.0, 1.0)), &trace);
  EXPECT_EQ(trace, (std::vector<std::size_t>{64, 32, 32, 16, 8, 4}));
  EXPECT_EQ(trace, backbone_shape_trace(NetworkConfig::desk(), 64));
  EXPECT_EQ(f.shape(), (Shape{2, 128}));
}

TEST(Backbone, ParameterNamesUnique) {
  ParameterSet ps;
  Backbone net(ps, NetworkConfig::standard());
  std::set<std::string> names;
  for (const auto& p : ps) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  EXPECT_EQ(layer_counts(NetworkConfig::standard()).conv2d_kernels,
            static_cast<std::size_t>(std::count_if(ps.begin(), ps.end(), [](const auto& p) {
              return p->value.rank() == 4;
            })));
}

TEST(Backbone, PresetsAndValidation) {
  EXPECT_EQ(NetworkConfig::preset("desk").name, "desk");
  EXPECT_EQ(NetworkConfig::preset("standard").input_resolution, 224u);
  EXPECT_THROW(NetworkConfig::preset("resnet"), std::invalid_argument);
  auto bad = NetworkConfig::desk();
  bad.stage_channels[2] = 30;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(backbone_shape_trace(NetworkConfig::desk(), 1), std::invalid_argument);
}
