// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "agenet/autodiff.hpp"

// Differentiable primitives. Each op validates shapes, computes its forward value,
// and registers a backward rule on the tape of its inputs.

namespace agenet::ops {

/// out[n, j] = sum_i input[n, i] * weight[i, j] + bias[j].
Var affine(Var input, Var weight, Var bias);

/// Cross-correlation. kernel: [C_out, C_in, k, k] with k odd; bias: [C_out].
Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding);
/// conv2d without a bias term.
Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding);

/// Length-preserving 1-D cross-correlation along the last axis of an [N, L] input,
/// zero padded by (k-1)/2. kernel: [k], k odd.
Var conv1d(Var input, Var kernel);

/// Windowed maximum, padding treated as -inf. Gradient goes to the first maximal element.
Var maxpool2d(Var input, std::size_t kernel, std::size_t stride, std::size_t padding);

/// [N, C, H, W] -> [N, C] spatial mean.
Var global_avg_pool(Var input);

Var add(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
/// x[N, C, H, W] * weights[N, C] broadcast over H and W.
Var mul_channel_broadcast(Var x, Var weights);
Var sigmoid(Var x);
Var relu(Var x);
Var scale(Var x, double factor);

/// Concatenation along axis 1 (channels for rank 4, features for rank 2).
/// All other extents must agree.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);

/// Sum of all elements -> scalar.
Var sum(Var x);

/// Same values with a new shape of equal size.
Var reshape(Var x, Shape shape);

/// Identity forward; blocks gradient flow.
Var detach(Var x);

/// sum_n -log softmax(logits[n])[true_class[n]], log-sum-exp stabilised. Scalar.
Var softmax_xent(Var logits, std::span<const int> true_class);

/// sum_n |h_n - target_n|. Gradient sign(h - target), 0 at the kink.
Var l1_loss(Var h, std::span<const double> target);

/// Numerically stable scalar helpers.
double stable_sigmoid(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

}  // namespace agenet::ops
