#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptdet/grid.hpp"

namespace ptdet {

/// Index of a node on a Tape. Only meaningful for the tape that issued it.
struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(NodeId, NodeId) = default;
};

/**
 * Append-only record of grid operations for reverse-mode differentiation.
 *
 * Every node keeps its forward value. Leaves are either constants (no
 * gradient) or parameters; an operation node requires a gradient when any
 * of its inputs does. `backward` sweeps nodes in descending id order, so a
 * node's gradient is complete before its own backward function runs.
 *
 * A Tape is not thread-safe. Use one tape per thread.
 */
class Tape {
 public:
  /// Propagates `out_grad` (gradient w.r.t. this node's value) into inputs.
  using BackwardFn = std::function<void(Tape& tape, const Grid& out_grad)>;

  NodeId constant(Grid value);
  NodeId parameter(Grid value);

  NodeId record(std::string kind, std::vector<NodeId> inputs, Grid value, BackwardFn backward);

  const Grid& value(NodeId id) const { return node(id).value; }
  const std::string& kind(NodeId id) const { return node(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return node(id).inputs; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  bool has_grad(NodeId id) const { return node(id).grad.has_value(); }

  /// Gradient after `backward`; throws if the node received none.
  const Grid& grad(NodeId id) const;

  /// Gradient accumulator for backward functions, zero-initialised on first use.
  Grid& grad_slot(NodeId id);

  std::size_t size() const { return nodes_.size(); }

  /// Populates gradients of a scalar (1x1x1) loss w.r.t. every node that requires one.
  void backward(NodeId loss);
  void zero_grad();

 private:
  struct Node {
    std::string kind;
    std::vector<NodeId> inputs;
    Grid value;
    std::optional<Grid> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  std::vector<Node> nodes_;
};

/// Convolution parameters. The kernel node holds a kH x kW x (Cin*Cout) grid laid
/// out as [ky][kx][cin][cout]; the bias node holds a 1 x 1 x Cout grid.
struct ConvSpec {
  NodeId kernel;
  NodeId bias;
  int stride = 1;
  int padding = 0;
};

/// Flat offset of weight (ky, kx, cin, cout) inside a kernel grid.
inline std::size_t kernel_offset(int kw, int cin, int cout, int ky, int kx, int ci, int co) {
  return ((static_cast<std::size_t>(ky) * kw + kx) * cin + ci) * cout + co;
}

/// Cross-correlation with zero padding.
NodeId conv2d(Tape& tape, NodeId input, const ConvSpec& spec);
NodeId relu(Tape& tape, NodeId input);
NodeId sigmoid(Tape& tape, NodeId input);
/// 2x2 stride-2 max pool; gradient goes to the first maximum in row-major order.
NodeId maxpool2(Tape& tape, NodeId input);
NodeId upsample_nearest(Tape& tape, NodeId input);
NodeId concat_channels(Tape& tape, NodeId a, NodeId b);

// Small arithmetic helpers used to compose scalar losses.
NodeId sum(Tape& tape, NodeId input);
NodeId scale(Tape& tape, NodeId input, double factor);
NodeId shift(Tape& tape, NodeId input, double offset);
NodeId add(Tape& tape, NodeId a, NodeId b);

/// Sum of elementwise weights * input, a scalar. Used to probe gradients.
NodeId weighted_sum(Tape& tape, NodeId input, const Grid& weights);

double sigmoid_value(double x);

}  // namespace ptdet
