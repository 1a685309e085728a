#include "ptdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ptdet/random.hpp"

namespace ptdet {

bool GradCheckReport::passed() const {
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_error);
  return m;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& build, const std::vector<NamedGrid>& params) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& p : params) ids.push_back(tape.constant(p.value));
  const NodeId loss = build(tape, ids);
  const Grid& v = tape.value(loss);
  if (v.size() != 1) throw ShapeError("grad_check: loss must be scalar, got " + v.shape_string());
  return v.data()[0];
}

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t max_entries, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (max_entries == 0 || max_entries >= n) return all;
  for (std::size_t i = n; i > 1; --i) std::swap(all[i - 1], all[rng_index(rng, i)]);
  all.resize(max_entries);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, const std::vector<NamedGrid>& params,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& p : params) ids.push_back(tape.parameter(p.value));
  const NodeId loss = build(tape, ids);
  tape.backward(loss);

  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  std::vector<NamedGrid> probe = params;

  for (std::size_t p = 0; p < params.size(); ++p) {
    ParamCheck check{params[p].name};
    const Grid analytic = tape.has_grad(ids[p]) ? tape.grad(ids[p]) : Grid(params[p].value.height(), params[p].value.width(), params[p].value.channels());
    for (std::size_t i : pick_entries(params[p].value.size(), options.max_entries, rng)) {
      double& slot = probe[p].value.data()[i];
      const double original = slot;
      slot = original + options.step;
      const double up = evaluate(build, probe);
      slot = original - options.step;
      const double down = evaluate(build, probe);
      slot = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(options.analytic_scale * analytic.data()[i], numeric);
      check.max_rel_error = std::max(check.max_rel_error, err);
      ++check.entries_checked;
    }
    check.passed = check.max_rel_error <= options.tolerance;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace ptdet
