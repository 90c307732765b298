// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "agenet/autodiff.hpp"
#include "agenet/ops.hpp"

using namespace agenet;

TEST(Tape, ConstantLossGivesZeroGradients) {
  Tape tape;
  Var x = tape.leaf(Tensor({3}, std::vector<double>{1, 2, 3}));
  Var c = tape.constant(Tensor::scalar(4.0));
  Var loss = ops::add(c, ops::scale(ops::sum(x), 0.0));
  tape.backward(loss);
  for (double g : x.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, SumGivesOnes) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, 0.7));
  tape.backward(ops::sum(x));
  for (double g : x.grad().values()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, UnusedLeafGetsZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  Var unused = tape.leaf(Tensor({3}, 1.0));
  tape.backward(ops::sum(x));
  ASSERT_EQ(unused.grad().size(), 3u);
  for (double g : unused.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, SharedNodeAccumulatesBothPaths) {
  // loss = sum(x*x + 3x) -> d/dx = 2x + 3
  Tape tape;
  Var x = tape.leaf(Tensor({3}, std::vector<double>{-1.0, 0.5, 2.0}));
  Var loss = ops::sum(ops::add(ops::mul(x, x), ops::scale(x, 3.0)));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 7.0);
}

TEST(Tape, RejectsNonScalarLoss) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Tape, RejectsSecondBackward) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  Var l = ops::sum(x);
  tape.backward(l);
  EXPECT_THROW(tape.backward(l), std::logic_error);
}

TEST(Tape, ParameterGradientsAccumulateIntoParameter) {
  ParameterSet ps;
  Parameter& p = ps.create("p", {2});
  p.value = Tensor({2}, std::vector<double>{1.0, 2.0});
  for (int round = 0; round < 2; ++round) {
    Tape tape;
    Var v = tape.parameter(p);
    tape.backward(ops::sum(ops::scale(v, 5.0)));
  }
  EXPECT_EQ(p.grad[0], 10.0);
  EXPECT_EQ(p.grad[1], 10.0);
}

TEST(Tape, ConstantsDoNotRecordBackward) {
  Tape tape;
  Var a = tape.constant(Tensor({2}, 1.0));
  Var b = ops::scale(a, 2.0);
  EXPECT_FALSE(b.requires_grad());
  Var c = tape.leaf(Tensor({2}, 1.0));
  EXPECT_TRUE(ops::add(b, c).requires_grad());
}

TEST(Tape, DetachBlocksGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, std::vector<double>{1.0, 2.0}));
  Var y = ops::detach(ops::scale(x, 3.0));
  EXPECT_EQ(y.value()[1], 6.0);
  Var loss = ops::sum(ops::add(ops::mul(y, x), x));
  tape.backward(loss);
  // Only the direct path survives: d/dx (y*x + x) with y held constant = y + 1.
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 7.0);
}
