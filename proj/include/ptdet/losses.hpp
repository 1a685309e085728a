#pragma once

#include "ptdet/heatmap.hpp"
#include "ptdet/tape.hpp"

namespace ptdet {

struct LossConfig {
  double beta = 2.0;
  double epsilon = 1e-6;
  /// 1: heatmap target at stage 2 (MSE + 1 - SDC); 2: binary target with 1 - F_beta.
  int variant = 1;

  void validate() const;
};

bool is_binary(const Grid& g);

double mse(const Heatmap& p, const Heatmap& g);
/// Soft Sorensen-Dice: (2 sum(p g) + eps) / (sum p^2 + sum g^2 + eps). On binary masks
/// the squares vanish; on soft maps the score reaches 1 only at p = g.
double sdc(const Heatmap& p, const Heatmap& g, double epsilon = 1e-6);
/// MSE + 1 - SDC
double loss_l1(const Heatmap& p, const Heatmap& g, double epsilon = 1e-6);
/// ((1+b^2) TP + eps) / ((1+b^2) TP + b^2 FN + FP + eps) with soft counts
/// TP = sum p g, FN = sum (1-p) g, FP = sum p (1-g). `g` must be binary.
double f_beta_score(const Heatmap& p, const Heatmap& g, double beta = 2.0, double epsilon = 1e-6);
double loss_l2(const Heatmap& p, const Heatmap& g, const LossConfig& cfg);
double loss_total(const Heatmap& stage1, const Heatmap& stage2, const Heatmap& g_heat, const Heatmap& g_bin,
                  const LossConfig& cfg);

// Tape versions; targets are constants, gradients flow into the prediction.
NodeId mse(Tape& tape, NodeId p, const Heatmap& g);
NodeId sdc(Tape& tape, NodeId p, const Heatmap& g, double epsilon = 1e-6);
NodeId loss_l1(Tape& tape, NodeId p, const Heatmap& g, double epsilon = 1e-6);
NodeId f_beta_score(Tape& tape, NodeId p, const Heatmap& g, double beta = 2.0, double epsilon = 1e-6);
NodeId loss_l2(Tape& tape, NodeId p, const Heatmap& g, const LossConfig& cfg);

struct LossNodes {
  NodeId l1;
  NodeId l2;
  NodeId total;
};

/// L1 on stage 1 against the heatmap target plus L2 on stage 2, unweighted.
LossNodes loss_total(Tape& tape, NodeId stage1, NodeId stage2, const Heatmap& g_heat, const Heatmap& g_bin,
                     const LossConfig& cfg);

}  // namespace ptdet
