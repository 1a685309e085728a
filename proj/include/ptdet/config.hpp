#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ptdet/data.hpp"
#include "ptdet/eval.hpp"
#include "ptdet/model.hpp"
#include "ptdet/train.hpp"

namespace ptdet {

struct EvalConfig {
  std::vector<double> radii{6.0, 8.0, 10.0};
  std::vector<Pooling> modes{Pooling::micro, Pooling::macro};
  double threshold = 0.5;  // decode threshold on stage-2 maps
  double closeness = 15.0;  // pixels; gt points with a neighbour this near are "close"
};

struct XvalCell {
  double sigma1 = 2.0;
  double sigma2 = 1.0;
  Distribution distribution = Distribution::gaussian;
  double alpha = 7.0;
  int variant = 1;
};

struct XvalConfig {
  int folds = 5;
  /// Empty means one cell taken from the model section.
  std::vector<XvalCell> grid;
  int parallel_folds = 1;
};

/// The one document behind every command. Sections: "model", "train" (with a
/// nested "augmentation"), "synth", "eval", "xval". Unknown keys are errors.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
  EvalConfig eval;
  XvalConfig xval;

  void validate() const;
};

/// Fields present in `text` override `base`.
RunConfig parse_run_config(std::string_view text, const std::string& source = "<string>", RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});
std::string run_config_json(const RunConfig& cfg);

std::vector<double> parse_radii(std::string_view list);
std::vector<Pooling> parse_modes(std::string_view list);

}  // namespace ptdet
