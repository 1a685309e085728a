#include "ptdet/check_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "ptdet/layers.hpp"
#include "ptdet/losses.hpp"
#include "ptdet/model.hpp"
#include "ptdet/random.hpp"

namespace ptdet {

namespace {

struct Case {
  std::string name;
  LossBuilder build;
  std::vector<NamedGrid> params;
  std::size_t max_entries = 0;
};

Grid random_grid(Rng& rng, int h, int w, int c, double lo, double hi) {
  Grid g(h, w, c);
  for (double& v : g.values()) v = uniform(rng, lo, hi);
  return g;
}

// Keeps entries clear of the relu kink.
Grid away_from_zero(Rng& rng, int h, int w, int c) {
  Grid g = random_grid(rng, h, w, c, -1.0, 1.0);
  for (double& v : g.values()) v = v < 0.0 ? std::min(v, -0.1) : std::max(v, 0.1);
  return g;
}

// Entries at least 0.02 apart so pooling windows have unique maxima.
Grid distinct_grid(Rng& rng, int h, int w, int c) {
  Grid g(h, w, c);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = 0.02 * static_cast<double>(i);
  for (std::size_t i = g.size(); i > 1; --i) std::swap(g.data()[i - 1], g.data()[rng_index(rng, i)]);
  return g;
}

Grid binary_grid(Rng& rng, int h, int w) {
  Grid g(h, w, 1);
  for (double& v : g.values()) v = bernoulli(rng, 0.3) ? 1.0 : 0.0;
  g(0, 0) = 1.0;
  return g;
}

// Reduces an arbitrary node to a scalar with fixed random weights.
LossBuilder probed(std::function<NodeId(Tape&, std::span<const NodeId>)> op, Grid probe) {
  return [op = std::move(op), probe = std::move(probe)](Tape& t, std::span<const NodeId> p) {
    return weighted_sum(t, op(t, p), probe);
  };
}

std::vector<Case> op_cases(Rng& rng) {
  std::vector<Case> cases;
  for (auto [stride, padding] : {std::pair{1, 1}, std::pair{2, 0}, std::pair{1, 2}}) {
    const int h = 7, w = 6, cin = 2, cout = 3, k = 3;
    const int oh = (h + 2 * padding - k) / stride + 1, ow = (w + 2 * padding - k) / stride + 1;
    cases.push_back({"conv2d(stride=" + std::to_string(stride) + ",pad=" + std::to_string(padding) + ")",
                     probed(
                         [stride, padding](Tape& t, std::span<const NodeId> p) {
                           return conv2d(t, p[0], {p[1], p[2], stride, padding});
                         },
                         random_grid(rng, oh, ow, cout, -1.0, 1.0)),
                     {{"input", random_grid(rng, h, w, cin, -1.0, 1.0)},
                      {"kernel", random_grid(rng, k, k, cin * cout, -0.5, 0.5)},
                      {"bias", random_grid(rng, 1, 1, cout, -0.5, 0.5)}}});
  }
  cases.push_back({"relu", probed([](Tape& t, std::span<const NodeId> p) { return relu(t, p[0]); },
                                  random_grid(rng, 5, 4, 2, -1.0, 1.0)),
                   {{"x", away_from_zero(rng, 5, 4, 2)}}});
  cases.push_back({"sigmoid", probed([](Tape& t, std::span<const NodeId> p) { return sigmoid(t, p[0]); },
                                     random_grid(rng, 5, 4, 2, -1.0, 1.0)),
                   {{"x", random_grid(rng, 5, 4, 2, -4.0, 4.0)}}});
  cases.push_back({"maxpool2", probed([](Tape& t, std::span<const NodeId> p) { return maxpool2(t, p[0]); },
                                      random_grid(rng, 3, 4, 2, -1.0, 1.0)),
                   {{"x", distinct_grid(rng, 6, 8, 2)}}});
  cases.push_back({"upsample_nearest",
                   probed([](Tape& t, std::span<const NodeId> p) { return upsample_nearest(t, p[0]); },
                          random_grid(rng, 6, 8, 2, -1.0, 1.0)),
                   {{"x", random_grid(rng, 3, 4, 2, -1.0, 1.0)}}});
  cases.push_back({"concat_channels",
                   probed([](Tape& t, std::span<const NodeId> p) { return concat_channels(t, p[0], p[1]); },
                          random_grid(rng, 4, 5, 5, -1.0, 1.0)),
                   {{"a", random_grid(rng, 4, 5, 2, -1.0, 1.0)}, {"b", random_grid(rng, 4, 5, 3, -1.0, 1.0)}}});
  cases.push_back({"sum",
                   [](Tape& t, std::span<const NodeId> p) { return scale(t, sum(t, p[0]), 0.7); },
                   {{"x", random_grid(rng, 4, 5, 2, -1.0, 1.0)}}});
  cases.push_back({"scale", probed([](Tape& t, std::span<const NodeId> p) { return scale(t, p[0], -1.7); },
                                   random_grid(rng, 4, 5, 1, -1.0, 1.0)),
                   {{"x", random_grid(rng, 4, 5, 1, -1.0, 1.0)}}});
  cases.push_back({"shift", probed([](Tape& t, std::span<const NodeId> p) { return sigmoid(t, shift(t, p[0], 0.3)); },
                                   random_grid(rng, 4, 5, 1, -1.0, 1.0)),
                   {{"x", random_grid(rng, 4, 5, 1, -1.0, 1.0)}}});
  cases.push_back({"add",
                   probed([](Tape& t, std::span<const NodeId> p) { return sigmoid(t, add(t, p[0], p[1])); },
                          random_grid(rng, 4, 5, 2, -1.0, 1.0)),
                   {{"a", random_grid(rng, 4, 5, 2, -1.0, 1.0)}, {"b", random_grid(rng, 4, 5, 2, -1.0, 1.0)}}});
  cases.push_back({"weighted_sum",
                   [w = random_grid(rng, 4, 5, 2, -1.0, 1.0)](Tape& t, std::span<const NodeId> p) {
                     return weighted_sum(t, sigmoid(t, p[0]), w);
                   },
                   {{"x", random_grid(rng, 4, 5, 2, -2.0, 2.0)}}});

  const Grid heat = random_grid(rng, 6, 7, 1, 0.0, 1.0);
  const Grid bin = binary_grid(rng, 6, 7);
  auto prob = [&] { return NamedGrid{"p", random_grid(rng, 6, 7, 1, 0.05, 0.95)}; };
  cases.push_back({"mse", [heat](Tape& t, std::span<const NodeId> p) { return mse(t, p[0], heat); }, {prob()}});
  cases.push_back({"sdc", [heat](Tape& t, std::span<const NodeId> p) { return sdc(t, p[0], heat); }, {prob()}});
  cases.push_back({"loss_l1", [heat](Tape& t, std::span<const NodeId> p) { return loss_l1(t, p[0], heat); }, {prob()}});
  cases.push_back(
      {"f_beta_score", [bin](Tape& t, std::span<const NodeId> p) { return f_beta_score(t, p[0], bin); }, {prob()}});
  for (int variant : {1, 2}) {
    const LossConfig cfg{2.0, 1e-6, variant};
    const Grid target = variant == 1 ? heat : bin;
    cases.push_back({"loss_l2(variant=" + std::to_string(variant) + ")",
                     [cfg, target](Tape& t, std::span<const NodeId> p) { return loss_l2(t, p[0], target, cfg); },
                     {prob()}});
  }
  return cases;
}

std::vector<Case> layer_cases(Rng& rng) {
  std::vector<Case> cases;
  for (double sigma2 : {1.0, 2.0}) {
    cases.push_back({"gaussian_filter(sigma2=" + std::to_string(static_cast<int>(sigma2)) + ")",
                     probed([sigma2](Tape& t, std::span<const NodeId> p) { return gaussian_filter(t, p[0], {sigma2, 0}); },
                            random_grid(rng, 9, 8, 1, -1.0, 1.0)),
                     {{"x", random_grid(rng, 9, 8, 1, 0.0, 1.0)}}});
  }
  for (double temperature : {0.1, 0.5}) {
    cases.push_back({"conv_soft_argmax(T=" + std::string(temperature == 0.1 ? "0.1" : "0.5") + ")",
                     probed(
                         [temperature](Tape& t, std::span<const NodeId> p) {
                           return conv_soft_argmax(t, p[0], {3, temperature});
                         },
                         random_grid(rng, 7, 6, 1, -1.0, 1.0)),
                     {{"x", random_grid(rng, 7, 6, 1, 0.0, 1.0)}}});
  }
  return cases;
}

std::vector<Case> model_cases(Rng& rng) {
  std::vector<Case> cases;
  const Grid img = random_grid(rng, 16, 16, 3, 0.0, 1.0);
  const PointSet pts(16, 16, {{4.2, 5.1}, {11.7, 10.3}});
  for (int variant : {1, 2}) {
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.base_channels = 4;
    cfg.input_height = cfg.input_width = 16;
    cfg.variant = variant;
    const Heatmap heat = encode(pts, cfg.target_spec());
    const Heatmap bin = encode(pts, DistributionSpec::binary());
    const ModelWeights w = build_model(cfg, rng());
    for (bool second : {false, true}) {
      cases.push_back({"model(variant=" + std::to_string(variant) + ")." + (second ? "L2" : "L1"),
                       [=](Tape& t, std::span<const NodeId> p) {
                         const ForwardNodes f = forward(t, p, cfg, t.constant(img));
                         const LossNodes l = loss_total(t, f.stage1, f.stage2, heat, bin, cfg.loss_config());
                         return second ? l.l2 : l.l1;
                       },
                       w.params, 24});
    }
  }
  return cases;
}

std::vector<Case> cases_for(const std::string& scope, std::uint64_t seed) {
  Rng rng(derive_seed(seed, scope));
  if (scope == "ops") return op_cases(rng);
  if (scope == "layers") return layer_cases(rng);
  if (scope == "model") return model_cases(rng);
  throw std::invalid_argument("unknown gradcheck scope '" + scope + "' (expected ops, layers or model)");
}

}  // namespace

std::vector<std::string> gradcheck_suite_names(const std::string& scope) {
  std::vector<std::string> names;
  for (const auto& c : cases_for(scope, 0)) names.push_back(c.name);
  return names;
}

std::vector<SuiteEntry> run_gradcheck_suite(const SuiteOptions& options) {
  if (options.scopes.empty()) throw std::invalid_argument("gradcheck: no scope selected");
  std::vector<std::vector<Case>> selected;
  bool fault_found = options.faulty.empty();
  for (const auto& scope : options.scopes) {
    selected.push_back(cases_for(scope, options.seed));
    for (const auto& c : selected.back()) fault_found = fault_found || c.name == options.faulty;
  }
  if (!fault_found) throw std::invalid_argument("gradcheck: no check named '" + options.faulty + "'");

  std::vector<SuiteEntry> out;
  for (std::size_t s = 0; s < options.scopes.size(); ++s) {
    const std::string& scope = options.scopes[s];
    for (const auto& c : selected[s]) {
      GradCheckOptions opts;
      opts.step = options.step;
      opts.tolerance = options.tolerance.value_or(scope == "model" ? 1e-3 : 1e-4);
      opts.max_entries = c.max_entries;
      opts.seed = derive_seed(options.seed, c.name);
      if (c.name == options.faulty) opts.analytic_scale = 1.01;
      out.push_back({scope, c.name, grad_check(c.build, c.params, opts)});
    }
  }
  return out;
}

}  // namespace ptdet
