#pragma once

#include "ptdet/heatmap.hpp"
#include "ptdet/tape.hpp"

namespace ptdet {

struct GaussianLayerSpec {
  double sigma2 = 1.0;
  /// Odd kernel extent; 0 selects 2 * ceil(3 * sigma2) + 1.
  int kernel_size = 0;

  int resolved_kernel_size() const;
};

struct SoftArgmaxSpec {
  int window = 3;
  double temperature = 0.1;
};

/// Sum-normalised k x k x 1 Gaussian kernel, truncated at the kernel extent.
Grid gaussian_kernel(const GaussianLayerSpec& spec);

/// Fixed (non-learnable) Gaussian smoothing of a single-channel node, zero padded
/// so the output keeps the input shape.
NodeId gaussian_filter(Tape& tape, NodeId input, const GaussianLayerSpec& spec);

/**
 * Convolutional soft-argmax acting as a local non-maximum suppression.
 *
 * Every pixel is replaced by the softmax-weighted mean of its window,
 * o(p) = sum_q w_q x_q with w_q = exp(x_q / T) / sum exp(x_q' / T). Window
 * positions outside the image are left out of the softmax. Small T tends to a
 * window max, large T to a window mean.
 */
NodeId conv_soft_argmax(Tape& tape, NodeId input, const SoftArgmaxSpec& spec);

// Tape-free conveniences.
Grid gaussian_filter(const Grid& input, const GaussianLayerSpec& spec);
Grid conv_soft_argmax(const Grid& input, const SoftArgmaxSpec& spec);

/// Change of local contrast at `peak` (column x, row y): (after(p) - mean of its
/// 8-neighbourhood) minus the same quantity for `before`. Positive means the
/// peak stands out more. `peak` must be a strict local maximum of `before`.
double nms_sharpness(const Heatmap& before, const Heatmap& after, int peak_x, int peak_y);

}  // namespace ptdet
