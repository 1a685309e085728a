#include "ptdet/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace ptdet {

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("loss config: beta must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("loss config: epsilon must be positive");
  if (variant != 1 && variant != 2) throw std::invalid_argument("loss config: variant must be 1 or 2");
}

bool is_binary(const Grid& g) {
  return std::all_of(g.values().begin(), g.values().end(), [](double v) { return v == 0.0 || v == 1.0; });
}

namespace {

void check_pair(const Grid& p, const Grid& g, const char* what) {
  require_heatmap(p, what);
  require_same_shape(p, g, what);
}

void check_binary_target(const Grid& g, const char* what) {
  if (!is_binary(g)) throw std::invalid_argument(std::string(what) + ": ground truth must be a binary {0,1} mask");
}

struct Sums {
  double pg = 0.0, p = 0.0, g = 0.0, pp = 0.0, gg = 0.0;
};

Sums sums(const Grid& p, const Grid& g) {
  Sums s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.pg += p.data()[i] * g.data()[i];
    s.p += p.data()[i];
    s.g += g.data()[i];
    s.pp += p.data()[i] * p.data()[i];
    s.gg += g.data()[i] * g.data()[i];
  }
  return s;
}

double dice_from(const Sums& s, double eps) { return (2.0 * s.pg + eps) / (s.pp + s.gg + eps); }

// TP = pg, FN = g - pg, FP = p - pg
double fbeta_from(const Sums& s, double beta, double eps) {
  const double b2 = beta * beta;
  const double num = (1.0 + b2) * s.pg + eps;
  return num / (num + b2 * (s.g - s.pg) + (s.p - s.pg));
}

}  // namespace

double mse(const Heatmap& p, const Heatmap& g) {
  check_pair(p, g, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.data()[i] - g.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(p.size());
}

double sdc(const Heatmap& p, const Heatmap& g, double epsilon) {
  check_pair(p, g, "sdc");
  return dice_from(sums(p, g), epsilon);
}

double loss_l1(const Heatmap& p, const Heatmap& g, double epsilon) { return mse(p, g) + 1.0 - sdc(p, g, epsilon); }

double f_beta_score(const Heatmap& p, const Heatmap& g, double beta, double epsilon) {
  check_pair(p, g, "f_beta_score");
  check_binary_target(g, "f_beta_score");
  return fbeta_from(sums(p, g), beta, epsilon);
}

double loss_l2(const Heatmap& p, const Heatmap& g, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.variant == 1) return loss_l1(p, g, cfg.epsilon);
  return 1.0 - f_beta_score(p, g, cfg.beta, cfg.epsilon);
}

double loss_total(const Heatmap& stage1, const Heatmap& stage2, const Heatmap& g_heat, const Heatmap& g_bin,
                  const LossConfig& cfg) {
  return loss_l1(stage1, g_heat, cfg.epsilon) + loss_l2(stage2, cfg.variant == 1 ? g_heat : g_bin, cfg);
}

// --- tape ---------------------------------------------------------------------

NodeId mse(Tape& tape, NodeId p, const Heatmap& g) {
  const double value = mse(tape.value(p), g);
  return tape.record("mse", {p}, Grid(1, 1, 1, value), [p, g](Tape& t, const Grid& og) {
    const Grid& pv = t.value(p);
    Grid& gp = t.grad_slot(p);
    const double k = 2.0 * og.data()[0] / static_cast<double>(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) gp.data()[i] += k * (pv.data()[i] - g.data()[i]);
  });
}

NodeId sdc(Tape& tape, NodeId p, const Heatmap& g, double epsilon) {
  const double value = sdc(tape.value(p), g, epsilon);
  return tape.record("sdc", {p}, Grid(1, 1, 1, value), [p, g, epsilon](Tape& t, const Grid& og) {
    const Grid& pv = t.value(p);
    const Sums s = sums(pv, g);
    const double num = 2.0 * s.pg + epsilon;
    const double den = s.pp + s.gg + epsilon;
    Grid& gp = t.grad_slot(p);
    const double up = og.data()[0];
    // d/dp_i = 2 g_i / den - 2 p_i num / den^2
    for (std::size_t i = 0; i < pv.size(); ++i) {
      gp.data()[i] += up * (2.0 * g.data()[i] / den - 2.0 * pv.data()[i] * num / (den * den));
    }
  });
}

NodeId loss_l1(Tape& tape, NodeId p, const Heatmap& g, double epsilon) {
  const NodeId m = mse(tape, p, g);
  const NodeId d = sdc(tape, p, g, epsilon);
  return add(tape, m, shift(tape, scale(tape, d, -1.0), 1.0));
}

NodeId f_beta_score(Tape& tape, NodeId p, const Heatmap& g, double beta, double epsilon) {
  const double value = f_beta_score(tape.value(p), g, beta, epsilon);
  return tape.record("f_beta", {p}, Grid(1, 1, 1, value), [p, g, beta, epsilon](Tape& t, const Grid& og) {
    const Grid& pv = t.value(p);
    const Sums s = sums(pv, g);
    const double b2 = beta * beta;
    const double num = (1.0 + b2) * s.pg + epsilon;
    const double den = num + b2 * (s.g - s.pg) + (s.p - s.pg);
    // d num / dp_i = (1+b2) g_i and d den / dp_i = 1 for every pixel
    Grid& gp = t.grad_slot(p);
    const double up = og.data()[0];
    for (std::size_t i = 0; i < pv.size(); ++i) {
      gp.data()[i] += up * ((1.0 + b2) * g.data()[i] * den - num) / (den * den);
    }
  });
}

NodeId loss_l2(Tape& tape, NodeId p, const Heatmap& g, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.variant == 1) return loss_l1(tape, p, g, cfg.epsilon);
  const NodeId f = f_beta_score(tape, p, g, cfg.beta, cfg.epsilon);
  return shift(tape, scale(tape, f, -1.0), 1.0);
}

LossNodes loss_total(Tape& tape, NodeId stage1, NodeId stage2, const Heatmap& g_heat, const Heatmap& g_bin,
                     const LossConfig& cfg) {
  cfg.validate();
  LossNodes n;
  n.l1 = loss_l1(tape, stage1, g_heat, cfg.epsilon);
  n.l2 = loss_l2(tape, stage2, cfg.variant == 1 ? g_heat : g_bin, cfg);
  n.total = add(tape, n.l1, n.l2);
  return n;
}

}  // namespace ptdet
