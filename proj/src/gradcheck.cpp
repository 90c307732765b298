// SPDX-License-Identifier: Apache-2.0
#include "agenet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "agenet/ops.hpp"

namespace agenet {
namespace {

std::vector<std::size_t> pick_elements(std::size_t size, const GradcheckOptions& o,
                                       std::uint64_t salt) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (o.max_elements == 0 || o.max_elements >= size) return idx;
  std::mt19937_64 rng(o.sample_seed * 0x9E3779B97F4A7C15ULL + salt);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(o.max_elements);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Fills the report from paired analytic/numeric samples.
TensorGradReport compare(const std::string& name, const std::vector<std::size_t>& idx,
                         const std::vector<double>& analytic, const std::vector<double>& numeric,
                         double tensor_scale, double scale_floor) {
  TensorGradReport r;
  r.name = name;
  r.checked = idx.size();
  double scale = tensor_scale;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (std::isnan(numeric[i])) continue;
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  const double floor = std::max(scale_floor * scale, 1e-300);
  bool first = true;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (std::isnan(numeric[i])) {
      r.unresolved += 1;
      continue;
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    const double err = std::abs(analytic[i] - numeric[i]) / denom;
    if (first || err > r.max_error) {
      first = false;
      r.max_error = err;
      r.worst_index = idx[i];
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric[i];
    }
  }
  return r;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

// Central difference of f around theta. With kink retries enabled, the estimate at h is
// accepted only if it agrees with the one at h/2: for smooth f the two differ by O(h^2),
// while a kink inside the interval shifts them by a fraction of the slope jump. Returns
// NaN when no step size settles.
double measure(const std::function<double(double)>& f, double theta, double center,
               double grad_scale, const GradcheckOptions& o) {
  auto central = [&](double h) { return (f(theta + h) - f(theta - h)) / (2.0 * h); };
  double h = o.step * std::max(1.0, std::abs(theta));
  if (o.kink_retries == 0) return central(h);
  for (std::size_t attempt = 0;; ++attempt) {
    const double coarse = central(h);
    const double fine = central(0.5 * h);
    const double rounding = 64.0 * std::numeric_limits<double>::epsilon() *
                            std::max(1.0, std::abs(center)) / h;
    const double allowed =
        std::max(0.5 * o.tolerance * std::max({std::abs(coarse), grad_scale}), rounding);
    if (std::abs(coarse - fine) <= allowed) return coarse;
    if (attempt == o.kink_retries) return std::numeric_limits<double>::quiet_NaN();
    h /= 10.0;
  }
}

}  // namespace

std::size_t GradcheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.checked;
  return n;
}

std::size_t GradcheckReport::unresolved() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.unresolved;
  return n;
}

bool GradcheckReport::passed() const {
  return max_error() < tolerance &&
         static_cast<double>(unresolved()) <=
             max_unresolved_fraction * static_cast<double>(checked());
}

double GradcheckReport::max_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_error);
  return m;
}

std::string GradcheckReport::failure() const {
  if (passed()) return {};
  std::ostringstream os;
  os.precision(6);
  if (static_cast<double>(unresolved()) > max_unresolved_fraction * static_cast<double>(checked())) {
    os << op << ": " << unresolved() << " of " << checked()
       << " elements unresolved (finite differences straddle a kink at every step)\n";
  }
  for (const auto& t : tensors) {
    if (t.max_error < tolerance) continue;
    os << op << ": " << t.name << "[" << t.worst_index << "] analytic=" << std::scientific
       << t.worst_analytic << " numeric=" << t.worst_numeric << " rel_err=" << t.max_error
       << " >= " << tolerance << "\n";
  }
  return os.str();
}

GradcheckReport gradcheck(const std::string& op, const InputLoss& loss,
                          std::vector<NamedInput> inputs, const GradcheckOptions& options) {
  auto evaluate = [&](const std::vector<NamedInput>& in) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : in) leaves.push_back(tape.constant(x.value));
    return loss(tape, leaves).value().item();
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x.value));
    Var l = loss(tape, leaves);
    tape.backward(l);
    for (const Var& v : leaves) analytic.push_back(v.grad());
  }

  GradcheckReport report;
  report.op = op;
  report.tolerance = options.tolerance;
  report.max_unresolved_fraction = options.max_unresolved_fraction;
  const double center = options.kink_retries > 0 ? evaluate(inputs) : 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto idx = pick_elements(inputs[t].value.size(), options, t);
    const double tensor_scale = max_abs(analytic[t]);
    const double grad_scale = options.scale_floor * tensor_scale;
    std::vector<double> a, n;
    for (std::size_t i : idx) {
      const double theta = inputs[t].value[i];
      auto f = [&](double x) {
        inputs[t].value[i] = x;
        const double v = evaluate(inputs);
        inputs[t].value[i] = theta;
        return v;
      };
      a.push_back(analytic[t][i]);
      n.push_back(measure(f, theta, center, grad_scale, options));
    }
    report.tensors.push_back(compare(inputs[t].name, idx, a, n, tensor_scale, options.scale_floor));
  }
  return report;
}

GradcheckReport gradcheck_parameters(const std::string& op, ParameterSet& params,
                                     const ParameterLoss& loss, const GradcheckOptions& options) {
  params.zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).value().item();
  };

  GradcheckReport report;
  report.op = op;
  report.tolerance = options.tolerance;
  report.max_unresolved_fraction = options.max_unresolved_fraction;
  const double center = options.kink_retries > 0 ? evaluate() : 0.0;
  std::uint64_t salt = 0;
  for (auto& p : params) {
    const auto idx = pick_elements(p->value.size(), options, salt++);
    const double tensor_scale = max_abs(p->grad);
    const double grad_scale = options.scale_floor * tensor_scale;
    std::vector<double> a, n;
    for (std::size_t i : idx) {
      const double theta = p->value[i];
      auto f = [&](double x) {
        p->value[i] = x;
        const double v = evaluate();
        p->value[i] = theta;
        return v;
      };
      a.push_back(p->grad[i]);
      n.push_back(measure(f, theta, center, grad_scale, options));
    }
    report.tensors.push_back(compare(p->name, idx, a, n, tensor_scale, options.scale_floor));
  }
  return report;
}

Var random_projection(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor r(out.shape());
  for (auto& v : r.values()) v = dist(rng);
  return ops::sum(ops::mul(out, out.tape->constant(std::move(r))));
}

}  // namespace agenet
