// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "agenet/autodiff.hpp"

// Central finite-difference verification of analytic gradients.
//
// Per element the error is |analytic - numeric| / max(|analytic|, |numeric|, floor),
// with floor = scale_floor * (largest gradient magnitude in that tensor). The floor
// keeps entries that are numerically zero relative to the tensor from being judged on
// rounding noise alone; with scale_floor = 0 the measure is purely relative.

namespace agenet {

struct GradcheckOptions {
  /// Perturbation is step * max(1, |theta|).
  double step = 1e-6;
  double tolerance = 1e-6;
  double scale_floor = 1e-3;
  /// Elements checked per tensor (sampled without replacement); 0 checks all.
  std::size_t max_elements = 0;
  std::uint64_t sample_seed = 0;
  /// When positive, each element is also measured at half the step. If the two central
  /// differences disagree by more than the tolerance allows (the step straddles a kink
  /// such as a ReLU or max-pool switch), the step is divided by 10 and the element
  /// re-measured, up to this many times. Elements that never settle are counted as
  /// unresolved and left out of the error.
  std::size_t kink_retries = 0;
  /// A report fails when more than this fraction of checked elements is unresolved.
  double max_unresolved_fraction = 0.1;
};

struct TensorGradReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t unresolved = 0;
  double max_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradcheckReport {
  std::string op;
  double tolerance = 0.0;
  double max_unresolved_fraction = 0.1;
  std::vector<TensorGradReport> tensors;

  double max_error() const;
  std::size_t checked() const;
  std::size_t unresolved() const;
  bool passed() const;
  /// Empty when passed, else names the op, tensor and element index.
  std::string failure() const;
};

struct NamedInput {
  std::string name;
  Tensor value;
};

/// Builds a scalar loss from leaves holding the inputs (same order).
using InputLoss = std::function<Var(Tape&, std::span<const Var>)>;
/// Builds a scalar loss reading the parameters of a model through `tape.parameter`.
using ParameterLoss = std::function<Var(Tape&)>;

GradcheckReport gradcheck(const std::string& op, const InputLoss& loss,
                          std::vector<NamedInput> inputs, const GradcheckOptions& options = {});

GradcheckReport gradcheck_parameters(const std::string& op, ParameterSet& params,
                                     const ParameterLoss& loss,
                                     const GradcheckOptions& options = {});

/// sum(out * r) with r ~ U(-1, 1) drawn from `seed`: a scalar whose gradient probes
/// every output element of `out`.
Var random_projection(Var out, std::uint64_t seed);

}  // namespace agenet
