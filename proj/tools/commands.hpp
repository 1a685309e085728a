#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptdet/config.hpp"

namespace ptdet::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Bad or missing arguments; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A check that ran and failed; exit code 1 without a stack of diagnostics.
class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config overrides collected from flags; applied after the config file.
struct Overrides {
  std::optional<int> epochs, variant, depth, base_channels, threads, batch_size;
  std::optional<double> learning_rate, sigma1, sigma2, alpha;
  std::optional<std::string> distribution;
  std::optional<std::uint64_t> seed;

  void apply(RunConfig& cfg) const;
};

struct EncodeArgs {
  std::string points;
  std::string dist = "gaussian";
  std::optional<double> sigma1, alpha;
  std::string out;
  std::string pgm;
};

struct DecodeArgs {
  std::string heatmap;
  double threshold = 0.5;
  int connectivity = 8;
  std::string out;
};

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<int> n_images, min_dots, max_dots, height, width;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> prefix;
};

struct SplitArgs {
  std::string data;
  int k = 5;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string config;
  std::string fold;
  std::string out;
  std::string log;
  Overrides overrides;
};

struct PredictArgs {
  std::string weights;
  std::string config;
  std::string data;
  std::string out;
  std::optional<double> threshold;
  bool heatmaps = false;
};

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string radii;
  std::string mode;
  std::string out;
  std::string dump;
  std::string config;
};

struct GradcheckArgs {
  std::string scope = "ops,layers,model";
  std::optional<double> tol;
  std::string fault;
  std::string out;
};

struct OverlayArgs {
  std::string image;
  std::string matches;
  std::string out;
};

struct XvalArgs {
  std::string data;
  std::string config;
  std::string out;
  Overrides overrides;
};

int cmd_encode(const EncodeArgs& a);
int cmd_decode(const DecodeArgs& a);
int cmd_synth(const SynthArgs& a);
int cmd_split(const SplitArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_predict(const PredictArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_gradcheck(const GradcheckArgs& a);
int cmd_overlay(const OverlayArgs& a);
int cmd_xval(const XvalArgs& a);

/// Writes through `writer` to a temporary sibling, then renames onto `path`.
void atomic_write(const std::string& path, const std::function<void(const std::string& tmp)>& writer);

}  // namespace ptdet::cli
