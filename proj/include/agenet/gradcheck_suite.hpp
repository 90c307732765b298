// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "agenet/gradcheck.hpp"

namespace agenet {

enum class GradcheckScope { Ops, Block, Full };

/// "ops", "block" or "full".
GradcheckScope gradcheck_scope_from_string(const std::string& name);

struct SuiteOptions {
  /// Randomised cases per op (shapes, values and projection all derive from the seed).
  std::size_t seeds = 100;
  std::uint64_t base_seed = 0;
  /// Relative error bound for ops and block scope.
  double op_tolerance = 1e-6;
  /// Relative error bound for the whole-network check.
  double full_tolerance = 1e-4;
  /// Input resolution and batch for the whole-network check.
  std::size_t full_resolution = 32;
  std::size_t full_batch = 2;
  /// Parameter elements sampled per tensor in the whole-network check.
  std::size_t full_elements_per_tensor = 6;
  /// Central-difference step for the whole-network check. Larger steps move stem pixels
  /// across ReLU and max-pool switches; much smaller ones are dominated by rounding.
  double full_step = 1e-5;
  /// Networks checked in full scope.
  std::size_t full_seeds = 3;
};

struct SuiteEntry {
  std::string name;
  std::size_t runs = 0;
  std::size_t checked = 0;
  /// Elements skipped because every finite-difference step straddled a kink.
  std::size_t unresolved = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  /// First failing report, empty when every run passed.
  std::string failure;

  bool passed() const { return failure.empty(); }
};

using SuiteProgress = std::function<void(const SuiteEntry&)>;

std::vector<SuiteEntry> run_gradcheck_suite(GradcheckScope scope, const SuiteOptions& options = {},
                                            const SuiteProgress& progress = {});

}  // namespace agenet
