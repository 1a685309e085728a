#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ptdet/gradcheck.hpp"

namespace ptdet {

struct SuiteEntry {
  std::string scope;
  std::string name;
  GradCheckReport report;
};

struct SuiteOptions {
  /// Any of "ops", "layers", "model".
  std::vector<std::string> scopes{"ops", "layers", "model"};
  /// Unset: 1e-4 for ops and layers, 1e-3 for model.
  std::optional<double> tolerance;
  double step = 1e-5;
  /// Entry whose analytic gradient is scaled by 1.01.
  std::string faulty;
  std::uint64_t seed = 1;
};

/// Checks every recorded op, both filter layers and the small end-to-end model
/// (depth 1, 16x16, both variants, L1 and L2 separately) against central
/// differences.
std::vector<SuiteEntry> run_gradcheck_suite(const SuiteOptions& options);

std::vector<std::string> gradcheck_suite_names(const std::string& scope);

}  // namespace ptdet
