// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "agenet/gradcheck.hpp"
#include "agenet/gradcheck_suite.hpp"
#include "agenet/ops.hpp"

using namespace agenet;

TEST(Gradcheck, AcceptsCorrectGradient) {
  auto loss = [](Tape&, std::span<const Var> in) {
    return ops::sum(ops::mul(in[0], ops::sigmoid(in[1])));
  };
  const auto report = gradcheck(
      "mul_sigmoid", loss,
      {{"a", Tensor({4}, std::vector<double>{0.3, -1.2, 2.0, 0.7})},
       {"b", Tensor({4}, std::vector<double>{-0.5, 0.1, 1.5, -2.0})}});
  EXPECT_TRUE(report.passed()) << report.failure();
  EXPECT_EQ(report.checked(), 8u);
  EXPECT_LT(report.max_error(), 1e-6);
}

TEST(Gradcheck, DetectsWrongGradient) {
  // detach hides the dependence of the loss on `a` from the analytic pass.
  auto loss = [](Tape&, std::span<const Var> in) {
    return ops::sum(ops::mul(ops::detach(in[0]), in[0]));
  };
  const auto report =
      gradcheck("broken", loss, {{"a", Tensor({3}, std::vector<double>{1.0, 2.0, -3.0})}});
  EXPECT_FALSE(report.passed());
  EXPECT_NE(report.failure().find("broken"), std::string::npos);
  EXPECT_NEAR(report.max_error(), 0.5, 1e-6);
}

TEST(Gradcheck, KinkRetriesResolveNearbySwitch) {
  // |x| sampled 1e-7 from its kink: the first step straddles it, a finer one does not.
  auto loss = [](Tape&, std::span<const Var> in) {
    return ops::sum(ops::add(ops::relu(in[0]), ops::relu(ops::scale(in[0], -1.0))));
  };
  GradcheckOptions opts;
  opts.step = 1e-6;
  opts.kink_retries = 2;
  const auto report = gradcheck("abs", loss, {{"x", Tensor({2}, std::vector<double>{1e-7, 0.4})}},
                                opts);
  EXPECT_TRUE(report.passed()) << report.failure();
  EXPECT_EQ(report.unresolved(), 0u);
}

TEST(Gradcheck, TooManyUnresolvedFails) {
  // Both elements sit inside every step tried, and each halving moves the estimate.
  auto loss = [](Tape&, std::span<const Var> in) { return ops::sum(ops::relu(in[0])); };
  GradcheckOptions opts;
  opts.step = 1e-3;
  opts.kink_retries = 1;
  const auto report =
      gradcheck("relu", loss, {{"x", Tensor({2}, std::vector<double>{7.5e-6, -7.5e-6})}}, opts);
  EXPECT_EQ(report.unresolved(), 2u);
  EXPECT_FALSE(report.passed());
}

TEST(Gradcheck, ParameterMode) {
  ParameterSet ps;
  Parameter& w = ps.create("w", {2, 2});
  w.value = Tensor({2, 2}, std::vector<double>{0.5, -0.3, 0.8, 0.1});
  Tensor x({3, 2}, std::vector<double>{1, 2, -1, 0.5, 0.3, -0.7});
  auto loss = [&](Tape& tape) {
    Var y = ops::affine(tape.constant(x), tape.parameter(w), tape.constant(Tensor({2}, 0.1)));
    return random_projection(ops::sigmoid(y), 3);
  };
  const auto report = gradcheck_parameters("affine_params", ps, loss);
  EXPECT_TRUE(report.passed()) << report.failure();
  EXPECT_EQ(report.checked(), 4u);
}

TEST(GradcheckSuite, ScopeNames) {
  EXPECT_EQ(gradcheck_scope_from_string("ops"), GradcheckScope::Ops);
  EXPECT_EQ(gradcheck_scope_from_string("block"), GradcheckScope::Block);
  EXPECT_EQ(gradcheck_scope_from_string("full"), GradcheckScope::Full);
  EXPECT_THROW(gradcheck_scope_from_string("net"), std::invalid_argument);
}

TEST(GradcheckSuite, OpsScopeFewSeeds) {
  SuiteOptions opts;
  opts.seeds = 5;
  const auto entries = run_gradcheck_suite(GradcheckScope::Ops, opts);
  EXPECT_GE(entries.size(), 15u);
  for (const auto& e : entries) {
    EXPECT_TRUE(e.passed()) << e.name << ": " << e.failure;
    EXPECT_EQ(e.runs, 5u) << e.name;
    EXPECT_LE(e.max_error, 1e-6) << e.name;
  }
}

TEST(GradcheckSuite, BlockScope) {
  SuiteOptions opts;
  opts.seeds = 20;
  const auto entries = run_gradcheck_suite(GradcheckScope::Block, opts);
  EXPECT_GE(entries.size(), 5u);
  for (const auto& e : entries) EXPECT_TRUE(e.passed()) << e.name << ": " << e.failure;
}
