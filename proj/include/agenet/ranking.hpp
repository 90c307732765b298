// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agenet/autodiff.hpp"

// Error-compression ranking: one scalar regression output h compared against K
// fixed half-integer age thresholds through independent sigmoids.

namespace agenet {

/// Fixed thresholds b_k = a_min - 0.5 + k, k = 0..K-1, K = a_max - a_min + 1.
struct IntervalPoints {
  int a_min = 0;
  int a_max = 0;
  std::vector<double> thresholds;

  std::size_t size() const { return thresholds.size(); }
};

/// Rejects a_min >= a_max.
IntervalPoints make_interval_points(int a_min, int a_max);

/// K-dimensional binary label: bits[k] = 1 iff age > b_k. Always a prefix of ones.
struct RankingLabel {
  int age = 0;
  std::vector<std::uint8_t> bits;
};

RankingLabel encode_ranking_label(int age, const IntervalPoints& points);

enum class Reduction { Sum, Mean };

/// -sum_i sum_k [ y_ik log s(h_i - b_k) + (1 - y_ik) log(1 - s(h_i - b_k)) ],
/// evaluated as softplus terms. `h` holds one value per sample (shape [N] or [N,1]).
/// Mean divides by N.
Var ecr_loss(Var h, std::span<const RankingLabel> labels, const IntervalPoints& points,
             Reduction reduction = Reduction::Sum);

/// Single-sample loss and dL/dh, outside any tape.
double ecr_loss_value(double h, const RankingLabel& label, const IntervalPoints& points);
double ecr_loss_derivative(double h, const RankingLabel& label, const IntervalPoints& points);

struct MinimizerResult {
  double argmin = 0.0;
  double loss = 0.0;
  /// True when the minimum sits on the edge of the search interval (loss monotone there).
  bool boundary_hit = false;
};

/// Brute-force argmin of the single-sample loss over [a_min - 5, a_max + 5]:
/// a 1e-3 grid scan followed by ternary refinement around the best grid point.
MinimizerResult ecr_minimizer_oracle(const RankingLabel& label, const IntervalPoints& points);

/// Predicted age from the regression output. Identity, unclamped.
inline double decode_age(double h) { return h; }

/// (1/N) sum |pred_i - truth_i|. Rejects N = 0 and length mismatch.
double mean_absolute_error(std::span<const double> pred, std::span<const int> truth);

enum class LossKind { Ecr, L1, MulticlassCe };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Width of the age output head required by each loss.
std::size_t age_output_width(LossKind kind, const IntervalPoints& points);

/// Age loss for any LossKind on a network output of shape [N, age_output_width].
///   Ecr          - ecr_loss against the encoded labels
///   L1           - sum |h_i - age_i|
///   MulticlassCe - softmax cross-entropy against class (age - a_min)
Var age_loss(LossKind kind, Var output, std::span<const int> ages, const IntervalPoints& points,
             Reduction reduction = Reduction::Sum);

/// Baseline losses (L1, MulticlassCe). Rejects Ecr and head/loss shape mismatches.
Var baseline_loss(LossKind kind, Var output, std::span<const int> ages,
                  const IntervalPoints& points);

/// Decoded age per sample from a network output: identity for Ecr/L1, argmax + a_min for CE.
std::vector<double> predict_ages(LossKind kind, const Tensor& output, const IntervalPoints& points);

}  // namespace agenet
