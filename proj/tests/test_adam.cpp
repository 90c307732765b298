// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "agenet/adam.hpp"

using namespace agenet;

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet ps;
  Parameter& p = ps.create("p", {3});
  p.value = Tensor({3}, std::vector<double>{1.0, -2.0, 0.5});
  p.grad = Tensor({3}, std::vector<double>{0.3, -7.0, 1e3});
  Adam adam(AdamOptions{.learning_rate = 0.01});
  adam.step(ps);
  EXPECT_EQ(adam.step_count(), 1u);
  EXPECT_NEAR(p.value[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(p.value[2], 0.5 - 0.01, 1e-9);
}

TEST(Adam, ZeroGradientLeavesValue) {
  ParameterSet ps;
  Parameter& p = ps.create("p", {2});
  p.value.fill(4.0);
  Adam adam;
  adam.step(ps);
  EXPECT_EQ(p.value[0], 4.0);
  EXPECT_EQ(p.value[1], 4.0);
}

TEST(Adam, SkipsFrozenParameters) {
  ParameterSet ps;
  Parameter& p = ps.create("p", {1});
  p.trainable = false;
  p.grad.fill(1.0);
  Adam adam;
  adam.step(ps);
  EXPECT_EQ(p.value[0], 0.0);
}

TEST(Adam, MinimisesQuadratic) {
  ParameterSet ps;
  Parameter& p = ps.create("p", {1});
  p.value.fill(3.0);
  Adam adam(AdamOptions{.learning_rate = 0.05});
  for (int i = 0; i < 2000; ++i) {
    p.grad[0] = 2.0 * (p.value[0] - 1.0);
    adam.step(ps);
  }
  EXPECT_NEAR(p.value[0], 1.0, 1e-3);
}

TEST(Adam, RejectsChangedParameterSet) {
  ParameterSet ps;
  ps.create("a", {1});
  Adam adam;
  adam.step(ps);
  ps.create("b", {1});
  EXPECT_THROW(adam.step(ps), std::logic_error);
}
