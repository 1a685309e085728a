#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ptdet/gradcheck.hpp"
#include "ptdet/heatmap.hpp"
#include "ptdet/layers.hpp"
#include "ptdet/losses.hpp"
#include "ptdet/tape.hpp"

namespace ptdet {

struct ModelConfig {
  int input_channels = 3;
  int depth = 3;  // encoder levels; 2x2 max pool between consecutive levels
  int base_channels = 8;
  Distribution distribution = Distribution::gaussian;  // target heatmap family
  double sigma1 = 2.0;
  double alpha = 7.0;
  double sigma2 = 1.0;
  double softargmax_temperature = 0.1;
  int variant = 1;
  double beta = 2.0;
  int input_height = 64;
  int input_width = 96;

  void validate() const;
  DistributionSpec target_spec() const;
  LossConfig loss_config() const;
  GaussianLayerSpec gaussian_layer() const { return {sigma2, 0}; }
  SoftArgmaxSpec soft_argmax() const { return {3, softargmax_temperature}; }
  int level_channels(int level) const { return base_channels << level; }
};

/// Named parameter grids in construction order.
struct ModelWeights {
  std::vector<NamedGrid> params;

  std::size_t parameter_count() const;
  const Grid& at(const std::string& name) const;
  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

/**
 * U-Net trunk: `depth` encoder levels of two 3x3 conv + ReLU (channels
 * base * 2^level) joined by max pooling, a mirrored decoder of nearest
 * upsampling, skip concatenation and two conv + ReLU, then a 1x1 conv to one
 * channel. Conv weights are drawn from N(0, 2 / fan_in); biases start at zero.
 */
ModelWeights build_model(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardNodes {
  NodeId logits;
  NodeId stage1;  // Gaussian-filtered sigmoid
  NodeId stage2;  // soft-argmax of stage 1
};

/// Records the network on `tape`; `params` are tape nodes in ModelWeights order.
ForwardNodes forward(Tape& tape, std::span<const NodeId> params, const ModelConfig& cfg, NodeId image);

struct ForwardResult {
  Heatmap stage1;
  Heatmap stage2;
};

ForwardResult forward(const ModelWeights& weights, const ModelConfig& cfg, const Grid& image);

/// Decoded stage-2 output.
PointSet predict(const ModelWeights& weights, const ModelConfig& cfg, const Grid& image, double threshold = 0.5);

// "HW01": magic, u32 count, then per parameter u32 name length, name bytes and
// the grid as an HM01 record.
void write_weights(std::ostream& out, const ModelWeights& weights);
ModelWeights read_weights(std::istream& in);
void save_weights(const std::string& path, const ModelWeights& weights);
ModelWeights load_weights(const std::string& path);

}  // namespace ptdet
