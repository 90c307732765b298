// SPDX-License-Identifier: Apache-2.0
#include "agenet/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "agenet/ops.hpp"

namespace agenet {

IntervalPoints make_interval_points(int a_min, int a_max) {
  if (a_min >= a_max) {
    throw std::invalid_argument("interval points: a_min (" + std::to_string(a_min) +
                                ") must be below a_max (" + std::to_string(a_max) + ")");
  }
  IntervalPoints p;
  p.a_min = a_min;
  p.a_max = a_max;
  const int k = a_max - a_min + 1;
  p.thresholds.reserve(k);
  for (int i = 0; i < k; ++i) p.thresholds.push_back(a_min - 0.5 + i);
  return p;
}

RankingLabel encode_ranking_label(int age, const IntervalPoints& points) {
  if (age < points.a_min || age > points.a_max) {
    throw std::out_of_range("ranking label: age " + std::to_string(age) + " outside [" +
                            std::to_string(points.a_min) + ", " + std::to_string(points.a_max) +
                            "]");
  }
  RankingLabel label;
  label.age = age;
  label.bits.reserve(points.size());
  for (double b : points.thresholds) label.bits.push_back(age > b ? 1 : 0);
  return label;
}

double ecr_loss_value(double h, const RankingLabel& label, const IntervalPoints& points) {
  double loss = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double z = h - points.thresholds[k];
    // -log s(z) = softplus(-z); -log(1 - s(z)) = softplus(z)
    loss += label.bits[k] ? ops::softplus(-z) : ops::softplus(z);
  }
  return loss;
}

double ecr_loss_derivative(double h, const RankingLabel& label, const IntervalPoints& points) {
  double d = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    d += ops::stable_sigmoid(h - points.thresholds[k]) - (label.bits[k] ? 1.0 : 0.0);
  }
  return d;
}

Var ecr_loss(Var h, std::span<const RankingLabel> labels, const IntervalPoints& points,
             Reduction reduction) {
  const Tensor& hv = h.value();
  if (hv.size() != labels.size()) {
    throw ShapeError("ecr_loss: " + std::to_string(hv.size()) + " outputs for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (hv.rank() > 2 || (hv.rank() == 2 && hv.dim(1) != 1)) {
    throw ShapeError("ecr_loss: expected one value per sample, got " + shape_string(hv.shape()));
  }
  for (const auto& l : labels) {
    if (l.bits.size() != points.size()) {
      throw ShapeError("ecr_loss: label has K=" + std::to_string(l.bits.size()) +
                       ", interval points have K=" + std::to_string(points.size()));
    }
  }
  const double factor =
      reduction == Reduction::Mean && !labels.empty() ? 1.0 / static_cast<double>(labels.size())
                                                      : 1.0;
  double loss = 0.0;
  std::vector<double> dloss(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    loss += ecr_loss_value(hv[i], labels[i], points);
    dloss[i] = ecr_loss_derivative(hv[i], labels[i], points) * factor;
  }
  loss *= factor;
  return h.tape->record(Tensor::scalar(loss), {h}, [dloss = std::move(dloss)](BackwardContext& c) {
    Tensor* dh = c.input_grad(0);
    if (dh == nullptr) return;
    const double g = c.output_grad()[0];
    for (std::size_t i = 0; i < dloss.size(); ++i) (*dh)[i] += g * dloss[i];
  });
}

MinimizerResult ecr_minimizer_oracle(const RankingLabel& label, const IntervalPoints& points) {
  constexpr double kGrid = 1e-3;
  const double lo = points.a_min - 5.0;
  const double hi = points.a_max + 5.0;
  const auto steps = static_cast<std::size_t>(std::llround((hi - lo) / kGrid));
  std::size_t best = 0;
  double best_loss = ecr_loss_value(lo, label, points);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double l = ecr_loss_value(lo + i * kGrid, label, points);
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  MinimizerResult r;
  r.boundary_hit = best == 0 || best == steps;
  double a = lo + (best == 0 ? 0 : best - 1) * kGrid;
  double b = lo + std::min(best + 1, steps) * kGrid;
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (ecr_loss_value(m1, label, points) < ecr_loss_value(m2, label, points)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  r.argmin = 0.5 * (a + b);
  r.loss = ecr_loss_value(r.argmin, label, points);
  return r;
}

double mean_absolute_error(std::span<const double> pred, std::span<const int> truth) {
  if (pred.empty()) throw std::invalid_argument("mae: empty prediction set");
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("mae: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(truth.size()) + " labels");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Ecr: return "ecr";
    case LossKind::L1: return "l1";
    case LossKind::MulticlassCe: return "ce";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "ecr") return LossKind::Ecr;
  if (name == "l1") return LossKind::L1;
  if (name == "ce") return LossKind::MulticlassCe;
  throw std::invalid_argument("unknown loss '" + name + "' (expected ecr, l1 or ce)");
}

std::size_t age_output_width(LossKind kind, const IntervalPoints& points) {
  return kind == LossKind::MulticlassCe ? points.size() : 1;
}

Var baseline_loss(LossKind kind, Var output, std::span<const int> ages,
                  const IntervalPoints& points) {
  const Tensor& out = output.value();
  const std::size_t n = ages.size();
  switch (kind) {
    case LossKind::L1: {
      if (out.size() != n || (out.rank() == 2 && out.dim(1) != 1)) {
        throw ShapeError("baseline_loss(l1): expected one output per sample, got " +
                         shape_string(out.shape()) + " for " + std::to_string(n) + " samples");
      }
      std::vector<double> target(ages.begin(), ages.end());
      return ops::l1_loss(output, target);
    }
    case LossKind::MulticlassCe: {
      if (out.rank() != 2 || out.dim(0) != n || out.dim(1) != points.size()) {
        throw ShapeError("baseline_loss(ce): expected [" + std::to_string(n) + "x" +
                         std::to_string(points.size()) + "] logits, got " +
                         shape_string(out.shape()));
      }
      std::vector<int> cls;
      cls.reserve(n);
      for (int a : ages) {
        if (a < points.a_min || a > points.a_max) {
          throw std::out_of_range("baseline_loss(ce): age " + std::to_string(a) + " out of range");
        }
        cls.push_back(a - points.a_min);
      }
      return ops::softmax_xent(output, cls);
    }
    case LossKind::Ecr: break;
  }
  throw std::invalid_argument("baseline_loss: ECR is not a baseline loss");
}

Var age_loss(LossKind kind, Var output, std::span<const int> ages, const IntervalPoints& points,
             Reduction reduction) {
  if (kind == LossKind::Ecr) {
    std::vector<RankingLabel> labels;
    labels.reserve(ages.size());
    for (int a : ages) labels.push_back(encode_ranking_label(a, points));
    return ecr_loss(output, labels, points, reduction);
  }
  Var l = baseline_loss(kind, output, ages, points);
  if (reduction == Reduction::Mean && !ages.empty()) {
    l = ops::scale(l, 1.0 / static_cast<double>(ages.size()));
  }
  return l;
}

std::vector<double> predict_ages(LossKind kind, const Tensor& output,
                                 const IntervalPoints& points) {
  std::vector<double> pred;
  if (kind == LossKind::MulticlassCe) {
    const std::size_t n = output.dim(0), k = output.dim(1);
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = output.data() + r * k;
      const auto best = std::max_element(row, row + k) - row;
      pred.push_back(static_cast<double>(points.a_min + best));
    }
    return pred;
  }
  for (double h : output.values()) pred.push_back(decode_age(h));
  return pred;
}

}  // namespace agenet
