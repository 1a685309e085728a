#include "ptdet/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <utility>

namespace ptdet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
  int in_h, in_w, cin;
  int kh, kw, cout;
  int stride, pad;
  int out_h, out_w;
  Eigen::Index patch() const { return static_cast<Eigen::Index>(kh) * kw * cin; }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(out_h) * out_w; }
};

RowMat im2col(const Grid& in, const ConvGeometry& g) {
  RowMat cols(g.pixels(), g.patch());
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      double* row = cols.data() + (static_cast<Eigen::Index>(oy) * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride - g.pad + kx;
          double* dst = row + (static_cast<Eigen::Index>(ky) * g.kw + kx) * g.cin;
          if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
            std::fill(dst, dst + g.cin, 0.0);
          } else {
            const double* src = in.data() + in.index(iy, ix);
            std::copy(src, src + g.cin, dst);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_accumulate(const RowMat& cols, const ConvGeometry& g, Grid& out) {
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const double* row = cols.data() + (static_cast<Eigen::Index>(oy) * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.in_w) continue;
          const double* src = row + (static_cast<Eigen::Index>(ky) * g.kw + kx) * g.cin;
          double* dst = out.data() + out.index(iy, ix);
          for (int c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

NodeId Tape::constant(Grid value) {
  nodes_.push_back(Node{"constant", {}, std::move(value), std::nullopt, nullptr, false});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::parameter(Grid value) {
  nodes_.push_back(Node{"parameter", {}, std::move(value), std::nullopt, nullptr, true});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::record(std::string kind, std::vector<NodeId> inputs, Grid value, BackwardFn backward) {
  bool needs = false;
  for (NodeId in : inputs) {
    if (in.value >= nodes_.size()) throw std::out_of_range("tape input id does not exist");
    needs = needs || nodes_[in.value].requires_grad;
  }
  if (!value.all_finite()) throw std::domain_error(kind + ": forward produced a non-finite value");
  nodes_.push_back(Node{std::move(kind), std::move(inputs), std::move(value), std::nullopt,
                        needs ? std::move(backward) : nullptr, needs});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.value >= nodes_.size()) throw std::out_of_range("unknown tape node");
  return nodes_[id.value];
}

Tape::Node& Tape::node(NodeId id) {
  if (id.value >= nodes_.size()) throw std::out_of_range("unknown tape node");
  return nodes_[id.value];
}

const Grid& Tape::grad(NodeId id) const {
  const auto& n = node(id);
  if (!n.grad) throw std::logic_error("node " + std::to_string(id.value) + " (" + n.kind + ") has no gradient");
  return *n.grad;
}

Grid& Tape::grad_slot(NodeId id) {
  auto& n = node(id);
  if (!n.grad) {
    n.grad.emplace(n.value);
    n.grad->fill(0.0);
  }
  return *n.grad;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.reset();
}

void Tape::backward(NodeId loss) {
  const Grid& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be a 1x1x1 scalar, got " + lv.shape_string());
  }
  zero_grad();
  grad_slot(loss).fill(1.0);
  for (std::int64_t i = loss.value; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.grad || !n.backward) continue;
    // Reachable inputs that need a gradient always get a (possibly zero) slot.
    for (NodeId in : n.inputs)
      if (nodes_[in.value].requires_grad) grad_slot(in);
    n.backward(*this, *n.grad);
  }
}

// ---------------------------------------------------------------------------
// Operations

NodeId conv2d(Tape& tape, NodeId input, const ConvSpec& spec) {
  const Grid& x = tape.value(input);
  const Grid& k = tape.value(spec.kernel);
  const Grid& b = tape.value(spec.bias);
  if (spec.stride < 1 || spec.padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  if (k.height() % 2 == 0 || k.width() % 2 == 0) {
    throw ShapeError("conv2d: kernel extent must be odd, got " + k.shape_string());
  }
  if (b.height() != 1 || b.width() != 1 || b.channels() < 1) {
    throw ShapeError("conv2d: bias must be 1x1xCout, got " + b.shape_string());
  }
  ConvGeometry g{x.height(), x.width(), x.channels(), k.height(), k.width(), b.channels(),
                 spec.stride, spec.padding, 0, 0};
  if (k.channels() != g.cin * g.cout) {
    throw ShapeError("conv2d: kernel " + k.shape_string() + " does not match input channels " +
                     std::to_string(g.cin) + " and output channels " + std::to_string(g.cout));
  }
  g.out_h = (g.in_h + 2 * g.pad - g.kh) / g.stride + 1;
  g.out_w = (g.in_w + 2 * g.pad - g.kw) / g.stride + 1;
  if (g.in_h + 2 * g.pad < g.kh || g.in_w + 2 * g.pad < g.kw || g.out_h < 1 || g.out_w < 1) {
    throw ShapeError("conv2d: input " + x.shape_string() + " too small for kernel " + k.shape_string());
  }

  const RowMat cols = im2col(x, g);
  ConstMapMat kmat(k.data(), g.patch(), g.cout);
  Grid out(g.out_h, g.out_w, g.cout);
  MapMat omat(out.data(), g.pixels(), g.cout);
  omat.noalias() = cols * kmat;
  Eigen::Map<const Eigen::RowVectorXd> bias(b.data(), g.cout);
  omat.rowwise() += bias;

  const ConvSpec s = spec;
  return tape.record("conv2d", {input, spec.kernel, spec.bias}, std::move(out),
                     [input, s, g](Tape& t, const Grid& og) {
                       ConstMapMat gout(og.data(), g.pixels(), g.cout);
                       const bool need_k = t.requires_grad(s.kernel);
                       const bool need_x = t.requires_grad(input);
                       if (need_k) {
                         const RowMat cols = im2col(t.value(input), g);
                         Grid& gk = t.grad_slot(s.kernel);
                         MapMat dk(gk.data(), g.patch(), g.cout);
                         dk.noalias() += cols.transpose() * gout;
                       }
                       if (need_x) {
                         ConstMapMat kmat(t.value(s.kernel).data(), g.patch(), g.cout);
                         RowMat dcols = gout * kmat.transpose();
                         col2im_accumulate(dcols, g, t.grad_slot(input));
                       }
                       if (t.requires_grad(s.bias)) {
                         Grid& gb = t.grad_slot(s.bias);
                         Eigen::Map<Eigen::RowVectorXd> db(gb.data(), g.cout);
                         db += gout.colwise().sum();
                       }
                     });
}

NodeId relu(Tape& tape, NodeId input) {
  Grid out = tape.value(input);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.record("relu", {input}, std::move(out), [input](Tape& t, const Grid& og) {
    const Grid& x = t.value(input);
    Grid& gx = t.grad_slot(input);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x.data()[i] > 0.0) gx.data()[i] += og.data()[i];
  });
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

NodeId sigmoid(Tape& tape, NodeId input) {
  Grid out = tape.value(input);
  for (double& v : out.values()) v = sigmoid_value(v);
  return tape.record("sigmoid", {input}, std::move(out), [input](Tape& t, const Grid& og) {
    // y is recomputed from the input.
    const Grid& x = t.value(input);
    Grid& gx = t.grad_slot(input);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = sigmoid_value(x.data()[i]);
      gx.data()[i] += og.data()[i] * y * (1.0 - y);
    }
  });
}

NodeId maxpool2(Tape& tape, NodeId input) {
  const Grid& x = tape.value(input);
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw ShapeError("maxpool2: height and width must be even, got " + x.shape_string());
  }
  const int h = x.height() / 2, w = x.width() / 2, c = x.channels();
  Grid out(h, w, c);
  std::vector<std::uint32_t> argmax(out.size());
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      for (int ch = 0; ch < c; ++ch) {
        std::size_t best = x.index(2 * y, 2 * xx, ch);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = x.index(2 * y + dy, 2 * xx + dx, ch);
            if (x.data()[i] > x.data()[best]) best = i;
          }
        out(y, xx, ch) = x.data()[best];
        argmax[out.index(y, xx, ch)] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return tape.record("maxpool2", {input}, std::move(out),
                     [input, argmax = std::move(argmax)](Tape& t, const Grid& og) {
                       Grid& gx = t.grad_slot(input);
                       for (std::size_t i = 0; i < argmax.size(); ++i) gx.data()[argmax[i]] += og.data()[i];
                     });
}

NodeId upsample_nearest(Tape& tape, NodeId input) {
  const Grid& x = tape.value(input);
  Grid out(2 * x.height(), 2 * x.width(), x.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int xx = 0; xx < out.width(); ++xx)
      for (int c = 0; c < x.channels(); ++c) out(y, xx, c) = x(y / 2, xx / 2, c);
  return tape.record("upsample_nearest", {input}, std::move(out), [input](Tape& t, const Grid& og) {
    Grid& gx = t.grad_slot(input);
    for (int y = 0; y < og.height(); ++y)
      for (int xx = 0; xx < og.width(); ++xx)
        for (int c = 0; c < og.channels(); ++c) gx(y / 2, xx / 2, c) += og(y, xx, c);
  });
}

NodeId concat_channels(Tape& tape, NodeId a, NodeId b) {
  const Grid& ga = tape.value(a);
  const Grid& gb = tape.value(b);
  if (ga.height() != gb.height() || ga.width() != gb.width()) {
    throw ShapeError("concat_channels: spatial mismatch " + ga.shape_string() + " vs " + gb.shape_string());
  }
  const int ca = ga.channels(), cb = gb.channels();
  Grid out(ga.height(), ga.width(), ca + cb);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < ca; ++c) out(y, x, c) = ga(y, x, c);
      for (int c = 0; c < cb; ++c) out(y, x, ca + c) = gb(y, x, c);
    }
  return tape.record("concat_channels", {a, b}, std::move(out), [a, b, ca, cb](Tape& t, const Grid& og) {
    const bool need_a = t.requires_grad(a), need_b = t.requires_grad(b);
    for (int y = 0; y < og.height(); ++y)
      for (int x = 0; x < og.width(); ++x) {
        if (need_a) {
          Grid& g = t.grad_slot(a);
          for (int c = 0; c < ca; ++c) g(y, x, c) += og(y, x, c);
        }
        if (need_b) {
          Grid& g = t.grad_slot(b);
          for (int c = 0; c < cb; ++c) g(y, x, c) += og(y, x, ca + c);
        }
      }
  });
}

NodeId sum(Tape& tape, NodeId input) {
  Grid out(1, 1, 1, tape.value(input).sum());
  return tape.record("sum", {input}, std::move(out), [input](Tape& t, const Grid& og) {
    const double g = og.data()[0];
    for (double& v : t.grad_slot(input).values()) v += g;
  });
}

NodeId scale(Tape& tape, NodeId input, double factor) {
  Grid out = tape.value(input);
  for (double& v : out.values()) v *= factor;
  return tape.record("scale", {input}, std::move(out), [input, factor](Tape& t, const Grid& og) {
    Grid& gx = t.grad_slot(input);
    for (std::size_t i = 0; i < og.size(); ++i) gx.data()[i] += factor * og.data()[i];
  });
}

NodeId shift(Tape& tape, NodeId input, double offset) {
  Grid out = tape.value(input);
  for (double& v : out.values()) v += offset;
  return tape.record("shift", {input}, std::move(out), [input](Tape& t, const Grid& og) {
    Grid& gx = t.grad_slot(input);
    for (std::size_t i = 0; i < og.size(); ++i) gx.data()[i] += og.data()[i];
  });
}

NodeId add(Tape& tape, NodeId a, NodeId b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Grid out = tape.value(a);
  const Grid& gb = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += gb.data()[i];
  return tape.record("add", {a, b}, std::move(out), [a, b](Tape& t, const Grid& og) {
    for (NodeId in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      Grid& g = t.grad_slot(in);
      for (std::size_t i = 0; i < og.size(); ++i) g.data()[i] += og.data()[i];
    }
  });
}

NodeId weighted_sum(Tape& tape, NodeId input, const Grid& weights) {
  const Grid& x = tape.value(input);
  require_same_shape(x, weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights.data()[i] * x.data()[i];
  return tape.record("weighted_sum", {input}, Grid(1, 1, 1, s), [input, weights](Tape& t, const Grid& og) {
    Grid& gx = t.grad_slot(input);
    const double g = og.data()[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g * weights.data()[i];
  });
}

}  // namespace ptdet
