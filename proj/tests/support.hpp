#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ptdet/gradcheck.hpp"
#include "ptdet/grid.hpp"
#include "ptdet/random.hpp"

namespace ptdet::testing {

inline Grid random_grid(Rng& rng, int h, int w, int c = 1, double lo = -1.0, double hi = 1.0) {
  Grid g(h, w, c);
  for (double& v : g.values()) v = uniform(rng, lo, hi);
  return g;
}

/// Random values whose magnitudes stay at least `gap` away from zero.
inline Grid away_from_zero(Rng& rng, int h, int w, int c, double gap = 1e-3) {
  Grid g(h, w, c);
  for (double& v : g.values()) {
    const double m = uniform(rng, gap + 0.05, 1.0);
    v = bernoulli(rng, 0.5) ? m : -m;
  }
  return g;
}

/// Distinct values with pairwise gaps of at least `gap` (a shuffled ladder).
inline Grid distinct_grid(Rng& rng, int h, int w, int c = 1, double gap = 1e-2) {
  Grid g(h, w, c);
  const std::size_t n = g.size();
  std::vector<double> ladder(n);
  for (std::size_t i = 0; i < n; ++i) ladder[i] = static_cast<double>(i) * gap;
  for (std::size_t i = n; i > 1; --i) std::swap(ladder[i - 1], ladder[rng_index(rng, i)]);
  std::copy(ladder.begin(), ladder.end(), g.data());
  return g;
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// Probe loss used by the op gradient checks: a fixed random projection of a node.
inline GradCheckReport check_unary(NodeId (*op)(Tape&, NodeId), const Grid& x, std::uint64_t seed = 7,
                                   double tol = 1e-4) {
  Rng rng(seed);
  Grid probe(1, 1, 1);
  bool first = true;
  LossBuilder build = [&](Tape& t, std::span<const NodeId> p) {
    NodeId y = op(t, p[0]);
    if (first) {
      const Grid& v = t.value(y);
      probe = random_grid(rng, v.height(), v.width(), v.channels());
      first = false;
    }
    return weighted_sum(t, y, probe);
  };
  GradCheckOptions opts;
  opts.tolerance = tol;
  return grad_check(build, {{"x", x}}, opts);
}

}  // namespace ptdet::testing

#include "ptdet/heatmap.hpp"

namespace ptdet::testing {

/// Rejection-sampled sub-pixel points with pairwise separation and border margin.
inline PointSet spaced_points(Rng& rng, int h, int w, int n, double separation, double margin) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PointSet ps(h, w);
    for (int tries = 0; tries < 5000 && static_cast<int>(ps.size()) < n; ++tries) {
      const Point p{uniform(rng, margin, w - 1 - margin), uniform(rng, margin, h - 1 - margin)};
      bool ok = true;
      for (const Point& q : ps.points()) ok = ok && distance(p, q) >= separation;
      if (ok) ps.add(p);
    }
    if (static_cast<int>(ps.size()) == n) return ps;
  }
  throw std::runtime_error("spaced_points: packing failed");
}

inline PointSet random_points(Rng& rng, int h, int w, int n) {
  PointSet ps(h, w);
  for (int i = 0; i < n; ++i) ps.add({uniform(rng, 0.0, w - 1e-9), uniform(rng, 0.0, h - 1e-9)});
  return ps;
}

/// Every source point has a distinct decoded partner within `tol`.
inline bool recovers(const PointSet& source, const PointSet& decoded, double tol) {
  if (source.size() != decoded.size()) return false;
  std::vector<bool> used(decoded.size(), false);
  for (const Point& p : source.points()) {
    bool found = false;
    for (std::size_t j = 0; j < decoded.size() && !found; ++j) {
      if (!used[j] && distance(p, decoded[j]) <= tol) used[j] = found = true;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace ptdet::testing
