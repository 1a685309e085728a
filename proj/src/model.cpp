#include "ptdet/model.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ptdet/random.hpp"

namespace ptdet {

void ModelConfig::validate() const {
  if (input_channels < 1) throw std::invalid_argument("model: input_channels must be positive");
  if (depth < 1 || depth > 8) throw std::invalid_argument("model: depth must lie in [1, 8]");
  if (base_channels < 1) throw std::invalid_argument("model: base_channels must be positive");
  if (variant != 1 && variant != 2) throw std::invalid_argument("model: variant must be 1 or 2");
  if (!(sigma2 > 0.0) || !(softargmax_temperature > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("model: sigma2, temperature and beta must be positive");
  }
  const int unit = 1 << depth;
  if (input_height < 1 || input_width < 1 || input_height % unit != 0 || input_width % unit != 0) {
    throw std::invalid_argument("model: input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                                " must be divisible by 2^depth = " + std::to_string(unit));
  }
  target_spec().validate();
  if (distribution == Distribution::binary) throw std::invalid_argument("model: target distribution cannot be binary");
}

DistributionSpec ModelConfig::target_spec() const {
  return distribution == Distribution::tanh ? DistributionSpec::tanh(alpha) : DistributionSpec::gaussian(sigma1);
}

LossConfig ModelConfig::loss_config() const { return {beta, 1e-6, variant}; }

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

const Grid& ModelWeights::at(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named " + name);
}

namespace {

struct ConvLayout {
  std::string name;
  int k, cin, cout;
};

std::vector<ConvLayout> layout(const ModelConfig& cfg) {
  std::vector<ConvLayout> convs;
  int in = cfg.input_channels;
  for (int l = 0; l < cfg.depth; ++l) {
    const int c = cfg.level_channels(l);
    convs.push_back({"enc" + std::to_string(l) + ".conv1", 3, in, c});
    convs.push_back({"enc" + std::to_string(l) + ".conv2", 3, c, c});
    in = c;
  }
  for (int l = cfg.depth - 2; l >= 0; --l) {
    const int c = cfg.level_channels(l);
    convs.push_back({"dec" + std::to_string(l) + ".conv1", 3, in + c, c});
    convs.push_back({"dec" + std::to_string(l) + ".conv2", 3, c, c});
    in = c;
  }
  convs.push_back({"head", 1, in, 1});
  return convs;
}

}  // namespace

ModelWeights build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelWeights w;
  for (const auto& conv : layout(cfg)) {
    Grid kernel(conv.k, conv.k, conv.cin * conv.cout);
    const double std_dev = std::sqrt(2.0 / (conv.k * conv.k * conv.cin));
    for (double& v : kernel.values()) v = std_dev * normal(rng);
    w.params.push_back({conv.name + ".weight", std::move(kernel)});
    w.params.push_back({conv.name + ".bias", Grid(1, 1, conv.cout, 0.0)});
  }
  return w;
}

ForwardNodes forward(Tape& tape, std::span<const NodeId> params, const ModelConfig& cfg, NodeId image) {
  const Grid& img = tape.value(image);
  if (img.height() != cfg.input_height || img.width() != cfg.input_width || img.channels() != cfg.input_channels) {
    throw ShapeError("forward: image " + img.shape_string() + " does not match configured input " +
                     std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width) + "x" +
                     std::to_string(cfg.input_channels));
  }
  const auto convs = layout(cfg);
  if (params.size() != 2 * convs.size()) {
    throw std::invalid_argument("forward: expected " + std::to_string(2 * convs.size()) + " parameter tensors, got " +
                                std::to_string(params.size()));
  }
  std::size_t cursor = 0;
  auto conv = [&](NodeId x, int padding) {
    ConvSpec spec{params[cursor], params[cursor + 1], 1, padding};
    cursor += 2;
    return conv2d(tape, x, spec);
  };
  auto block = [&](NodeId x) { return relu(tape, conv(relu(tape, conv(x, 1)), 1)); };

  std::vector<NodeId> skips;
  NodeId x = image;
  for (int l = 0; l < cfg.depth; ++l) {
    if (l > 0) x = maxpool2(tape, x);
    x = block(x);
    skips.push_back(x);
  }
  for (int l = cfg.depth - 2; l >= 0; --l) {
    x = concat_channels(tape, upsample_nearest(tape, x), skips[static_cast<std::size_t>(l)]);
    x = block(x);
  }
  ForwardNodes out;
  out.logits = conv(x, 0);
  out.stage1 = gaussian_filter(tape, sigmoid(tape, out.logits), cfg.gaussian_layer());
  out.stage2 = conv_soft_argmax(tape, out.stage1, cfg.soft_argmax());
  return out;
}

ForwardResult forward(const ModelWeights& weights, const ModelConfig& cfg, const Grid& image) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(weights.params.size());
  for (const auto& p : weights.params) ids.push_back(tape.constant(p.value));
  const ForwardNodes n = forward(tape, ids, cfg, tape.constant(image));
  return {tape.value(n.stage1), tape.value(n.stage2)};
}

PointSet predict(const ModelWeights& weights, const ModelConfig& cfg, const Grid& image, double threshold) {
  return decode(forward(weights, cfg, image).stage2, threshold);
}

void write_weights(std::ostream& out, const ModelWeights& weights) {
  out.write("HW01", 4);
  le::put_u32(out, static_cast<std::uint32_t>(weights.params.size()));
  for (const auto& p : weights.params) {
    le::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_hm01(out, p.value);
  }
}

ModelWeights read_weights(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "HW01") throw std::runtime_error("not an HW01 weights file");
  const auto count = le::get_u32(in);
  if (count > 4096) throw std::runtime_error("HW01: implausible parameter count");
  ModelWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = le::get_u32(in);
    if (len > 1024) throw std::runtime_error("HW01: implausible parameter name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw std::runtime_error("HW01: truncated parameter name");
    w.params.push_back({std::move(name), read_hm01(in)});
  }
  return w;
}

void save_weights(const std::string& path, const ModelWeights& weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_weights(out, weights);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_weights(in);
}

}  // namespace ptdet
