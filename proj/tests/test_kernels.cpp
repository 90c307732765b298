// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "agenet/kernels.hpp"

namespace k = agenet::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

struct ThreadGuard {
  int saved = k::max_threads();
  ~ThreadGuard() { k::set_threads(saved); }
};

const k::Conv2dGeometry kGeometries[] = {
    {2, 3, 9, 9, 4, 3, 1, 1},
    {1, 4, 12, 10, 6, 5, 2, 2},
    {3, 2, 7, 7, 8, 1, 1, 0},
    {2, 3, 16, 16, 5, 7, 2, 3},
};

}  // namespace

TEST(Kernels, ConvForwardMatchesReferenceExactly) {
  for (const auto& g : kGeometries) {
    const auto x = random_vector(g.batch * g.in_channels * g.in_h * g.in_w, 1);
    const auto w = random_vector(g.out_channels * g.patch(), 2);
    const auto b = random_vector(g.out_channels, 3);
    const std::size_t out = g.batch * g.out_channels * g.out_h() * g.out_w();
    std::vector<double> ref(out), par(out);
    k::reference::conv2d_forward(g, x.data(), w.data(), b.data(), ref.data());
    k::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), par.data());
    EXPECT_EQ(ref, par);
  }
}

TEST(Kernels, ConvBackwardMatchesReference) {
  for (const auto& g : kGeometries) {
    const std::size_t in = g.batch * g.in_channels * g.in_h * g.in_w;
    const std::size_t out = g.batch * g.out_channels * g.out_h() * g.out_w();
    const auto x = random_vector(in, 4);
    const auto w = random_vector(g.out_channels * g.patch(), 5);
    const auto dy = random_vector(out, 6);

    std::vector<double> dx_ref(in, 0.5), dx_par(in, 0.5);
    k::reference::conv2d_backward_input(g, dy.data(), w.data(), dx_ref.data());
    k::parallel::conv2d_backward_input(g, dy.data(), w.data(), dx_par.data());
    for (std::size_t i = 0; i < in; ++i) EXPECT_NEAR(dx_ref[i], dx_par[i], 1e-12);

    std::vector<double> dw_ref(w.size(), 0.0), dw_par(w.size(), 0.0);
    std::vector<double> db_ref(g.out_channels, 0.0), db_par(g.out_channels, 0.0);
    k::reference::conv2d_backward_weight(g, dy.data(), x.data(), dw_ref.data(), db_ref.data());
    k::parallel::conv2d_backward_weight(g, dy.data(), x.data(), dw_par.data(), db_par.data());
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(dw_ref[i], dw_par[i], 1e-12);
    for (std::size_t i = 0; i < db_ref.size(); ++i) EXPECT_NEAR(db_ref[i], db_par[i], 1e-12);
  }
}

TEST(Kernels, AffineMatchesReference) {
  const std::size_t n = 5, d_in = 13, d_out = 7;
  const auto x = random_vector(n * d_in, 7);
  const auto w = random_vector(d_in * d_out, 8);
  const auto b = random_vector(d_out, 9);
  std::vector<double> ref(n * d_out), par(n * d_out);
  k::reference::affine_forward(n, d_in, d_out, x.data(), w.data(), b.data(), ref.data());
  k::parallel::affine_forward(n, d_in, d_out, x.data(), w.data(), b.data(), par.data());
  EXPECT_EQ(ref, par);

  const auto dy = random_vector(n * d_out, 10);
  std::vector<double> dx_r(n * d_in, 0.0), dw_r(d_in * d_out, 0.0), db_r(d_out, 0.0);
  std::vector<double> dx_p(n * d_in, 0.0), dw_p(d_in * d_out, 0.0), db_p(d_out, 0.0);
  k::reference::affine_backward(n, d_in, d_out, dy.data(), x.data(), w.data(), dx_r.data(),
                                dw_r.data(), db_r.data());
  k::parallel::affine_backward(n, d_in, d_out, dy.data(), x.data(), w.data(), dx_p.data(),
                               dw_p.data(), db_p.data());
  for (std::size_t i = 0; i < dx_r.size(); ++i) EXPECT_NEAR(dx_r[i], dx_p[i], 1e-12);
  for (std::size_t i = 0; i < dw_r.size(); ++i) EXPECT_NEAR(dw_r[i], dw_p[i], 1e-12);
  for (std::size_t i = 0; i < db_r.size(); ++i) EXPECT_NEAR(db_r[i], db_p[i], 1e-12);
}

TEST(Kernels, MaxPoolMatchesReference) {
  const k::Pool2dGeometry g{2, 3, 11, 11, 3, 2, 1};
  const auto x = random_vector(g.batch * g.channels * g.in_h * g.in_w, 11);
  const std::size_t out = g.batch * g.channels * g.out_h() * g.out_w();
  std::vector<double> y_r(out), y_p(out);
  std::vector<std::size_t> a_r(out), a_p(out);
  k::reference::maxpool2d_forward(g, x.data(), y_r.data(), a_r.data());
  k::parallel::maxpool2d_forward(g, x.data(), y_p.data(), a_p.data());
  EXPECT_EQ(y_r, y_p);
  EXPECT_EQ(a_r, a_p);
}

TEST(Kernels, ParallelResultsIndependentOfThreadCount) {
  ThreadGuard guard;
  const k::Conv2dGeometry g{4, 3, 12, 12, 8, 3, 1, 1};
  const std::size_t in = g.batch * g.in_channels * g.in_h * g.in_w;
  const std::size_t out = g.batch * g.out_channels * g.out_h() * g.out_w();
  const auto x = random_vector(in, 12);
  const auto w = random_vector(g.out_channels * g.patch(), 13);
  const auto b = random_vector(g.out_channels, 14);
  const auto dy = random_vector(out, 15);

  auto run = [&](int threads) {
    k::set_threads(threads);
    std::vector<double> y(out), dx(in, 0.0), dw(w.size(), 0.0), db(g.out_channels, 0.0);
    k::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    k::parallel::conv2d_backward_input(g, dy.data(), w.data(), dx.data());
    k::parallel::conv2d_backward_weight(g, dy.data(), x.data(), dw.data(), db.data());
    y.insert(y.end(), dx.begin(), dx.end());
    y.insert(y.end(), dw.begin(), dw.end());
    y.insert(y.end(), db.begin(), db.end());
    return y;
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(2));
  EXPECT_EQ(one, run(4));
}

TEST(Kernels, MaxPoolBackwardRoutesToArgmax) {
  const double dy[] = {1.0, 2.0};
  const std::size_t argmax[] = {3, 3};
  double dx[4] = {0, 0, 0, 0};
  k::maxpool2d_backward(2, dy, argmax, dx);
  EXPECT_EQ(dx[3], 3.0);
  EXPECT_EQ(dx[0], 0.0);
}
