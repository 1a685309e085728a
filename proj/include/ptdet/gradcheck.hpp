#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ptdet/tape.hpp"

namespace ptdet {

struct NamedGrid {
  std::string name;
  Grid value;

  friend bool operator==(const NamedGrid&, const NamedGrid&) = default;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Entries probed per parameter; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
  /// Multiplies analytic gradients before comparison. Anything but 1 is a fault.
  double analytic_scale = 1.0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<ParamCheck> params;

  bool passed() const;
  double max_rel_error() const;
};

/// Builds a scalar loss on `tape` from the parameter nodes, in the order given.
using LossBuilder = std::function<NodeId(Tape& tape, std::span<const NodeId> params)>;

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares tape gradients against central finite differences.
GradCheckReport grad_check(const LossBuilder& build, const std::vector<NamedGrid>& params,
                           const GradCheckOptions& options = {});

}  // namespace ptdet
