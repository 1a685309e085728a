#include "ptdet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ptdet {

int GaussianLayerSpec::resolved_kernel_size() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian layer: sigma2 must be positive");
  const int k = kernel_size > 0 ? kernel_size : 2 * static_cast<int>(std::ceil(3.0 * sigma2)) + 1;
  if (k % 2 == 0) throw std::invalid_argument("gaussian layer: kernel size must be odd");
  return k;
}

Grid gaussian_kernel(const GaussianLayerSpec& spec) {
  const int k = spec.resolved_kernel_size();
  const int r = k / 2;
  Grid kernel(k, k, 1);
  double total = 0.0;
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) {
      const double d2 = static_cast<double>((x - r) * (x - r) + (y - r) * (y - r));
      kernel(y, x) = std::exp(-d2 / (2.0 * spec.sigma2 * spec.sigma2));
      total += kernel(y, x);
    }
  for (double& v : kernel.values()) v /= total;
  return kernel;
}

NodeId gaussian_filter(Tape& tape, NodeId input, const GaussianLayerSpec& spec) {
  require_heatmap(tape.value(input), "gaussian_filter");
  const Grid kernel = gaussian_kernel(spec);
  ConvSpec conv;
  conv.kernel = tape.constant(kernel);
  conv.bias = tape.constant(Grid(1, 1, 1, 0.0));
  conv.padding = kernel.height() / 2;
  return conv2d(tape, input, conv);
}

namespace {

// Softmax weights of the window around (y, x); returns the output value.
double window_softmax(const Grid& in, int y, int x, int r, double temperature, std::vector<double>& weights) {
  const int y0 = std::max(0, y - r), y1 = std::min(in.height() - 1, y + r);
  const int x0 = std::max(0, x - r), x1 = std::min(in.width() - 1, x + r);
  double peak = -std::numeric_limits<double>::infinity();
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx) peak = std::max(peak, in(yy, xx));
  weights.clear();
  double z = 0.0;
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx) {
      const double e = std::exp((in(yy, xx) - peak) / temperature);
      weights.push_back(e);
      z += e;
    }
  // Offsets from the peak keep a constant window exact.
  double offset = 0.0;
  std::size_t i = 0;
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx, ++i) {
      weights[i] /= z;
      offset += weights[i] * (in(yy, xx) - peak);
    }
  return peak + offset;
}

}  // namespace

NodeId conv_soft_argmax(Tape& tape, NodeId input, const SoftArgmaxSpec& spec) {
  const Grid& x = tape.value(input);
  require_heatmap(x, "conv_soft_argmax");
  if (spec.window < 1 || spec.window % 2 == 0) throw std::invalid_argument("conv_soft_argmax: window must be odd");
  if (!(spec.temperature > 0.0)) throw std::invalid_argument("conv_soft_argmax: temperature must be positive");
  const int r = spec.window / 2;
  const double t = spec.temperature;

  Grid out(x.height(), x.width(), 1);
  std::vector<double> w;
  for (int y = 0; y < x.height(); ++y)
    for (int xx = 0; xx < x.width(); ++xx) out(y, xx) = window_softmax(x, y, xx, r, t, w);

  return tape.record("conv_soft_argmax", {input}, std::move(out), [input, r, t](Tape& tp, const Grid& og) {
    const Grid& in = tp.value(input);
    Grid& gx = tp.grad_slot(input);
    std::vector<double> w;
    // d o(p) / d x_q = w_q * (1 + (x_q - o(p)) / T)
    for (int y = 0; y < in.height(); ++y) {
      for (int x = 0; x < in.width(); ++x) {
        const double g = og(y, x);
        if (g == 0.0) continue;
        const double o = window_softmax(in, y, x, r, t, w);
        const int y0 = std::max(0, y - r), y1 = std::min(in.height() - 1, y + r);
        const int x0 = std::max(0, x - r), x1 = std::min(in.width() - 1, x + r);
        std::size_t i = 0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int xx = x0; xx <= x1; ++xx, ++i) gx(yy, xx) += g * w[i] * (1.0 + (in(yy, xx) - o) / t);
      }
    }
  });
}

Grid gaussian_filter(const Grid& input, const GaussianLayerSpec& spec) {
  Tape tape;
  return tape.value(gaussian_filter(tape, tape.constant(input), spec));
}

Grid conv_soft_argmax(const Grid& input, const SoftArgmaxSpec& spec) {
  Tape tape;
  return tape.value(conv_soft_argmax(tape, tape.constant(input), spec));
}

namespace {

double local_contrast(const Heatmap& h, int px, int py) {
  double total = 0.0;
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int x = px + dx, y = py + dy;
      if (x < 0 || y < 0 || x >= h.width() || y >= h.height()) continue;
      total += h(y, x);
      ++n;
    }
  return n == 0 ? 0.0 : h(py, px) - total / n;
}

}  // namespace

double nms_sharpness(const Heatmap& before, const Heatmap& after, int peak_x, int peak_y) {
  require_heatmap(before, "nms_sharpness");
  require_same_shape(before, after, "nms_sharpness");
  if (peak_x < 0 || peak_y < 0 || peak_x >= before.width() || peak_y >= before.height()) {
    throw std::invalid_argument("nms_sharpness: peak outside the heatmap");
  }
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = peak_x + dx, y = peak_y + dy;
      if ((dx == 0 && dy == 0) || x < 0 || y < 0 || x >= before.width() || y >= before.height()) continue;
      if (!(before(y, x) < before(peak_y, peak_x))) {
        throw std::invalid_argument("nms_sharpness: peak is not a strict local maximum");
      }
    }
  return local_contrast(after, peak_x, peak_y) - local_contrast(before, peak_x, peak_y);
}

}  // namespace ptdet
