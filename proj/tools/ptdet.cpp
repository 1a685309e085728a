#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace ptdet::cli;

namespace {

void add_overrides(CLI::App* sub, Overrides& o) {
  sub->add_option("--epochs", o.epochs, "Training epochs");
  sub->add_option("--lr", o.learning_rate, "Initial learning rate");
  sub->add_option("--seed", o.seed, "Training seed");
  sub->add_option("--variant", o.variant, "Loss variant (1 or 2)");
  sub->add_option("--depth", o.depth, "Encoder levels");
  sub->add_option("--base-channels", o.base_channels, "Channels at the first level");
  sub->add_option("--sigma1", o.sigma1, "Gaussian target spread");
  sub->add_option("--sigma2", o.sigma2, "Gaussian filter layer spread");
  sub->add_option("--alpha", o.alpha, "Tanh target spread");
  sub->add_option("--dist", o.distribution, "Target distribution (gaussian, tanh)");
  sub->add_option("--batch-size", o.batch_size, "Batch size");
  sub->add_option("--threads", o.threads, "Batch items processed concurrently");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-instance point detection by heatmap regression"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Rasterise a points file into an HM01 heatmap");
  encode->add_option("points", enc.points, "Canonical or labelme points JSON")->required();
  encode->add_option("--dist", enc.dist, "gaussian, tanh or binary");
  encode->add_option("--sigma1", enc.sigma1, "Gaussian spread (pixels)");
  encode->add_option("--alpha", enc.alpha, "Tanh spread (pixels)");
  encode->add_option("--out", enc.out, "Output .hm01")->required();
  encode->add_option("--pgm", enc.pgm, "Also write a 16-bit PGM");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Extract points from an HM01 heatmap");
  decode->add_option("heatmap", dec.heatmap, "Input .hm01")->required();
  decode->add_option("--threshold", dec.threshold, "Binarisation threshold");
  decode->add_option("--connectivity", dec.connectivity, "4 or 8");
  decode->add_option("--out", dec.out, "Output points JSON")->required();

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled dataset");
  synth->add_option("--config", syn.config, "Run config JSON");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--n", syn.n_images, "Number of images");
  synth->add_option("--min-dots", syn.min_dots, "Fewest dots per image");
  synth->add_option("--max-dots", syn.max_dots, "Most dots per image");
  synth->add_option("--height", syn.height, "Image height");
  synth->add_option("--width", syn.width, "Image width");
  synth->add_option("--seed", syn.seed, "Generator seed");
  synth->add_option("--prefix", syn.prefix, "Sample id prefix");

  SplitArgs spl;
  auto* split = app.add_subcommand("split", "Group-level k-fold split manifests");
  split->add_option("--data", spl.data, "Dataset directory")->required();
  split->add_option("--k", spl.k, "Number of folds");
  split->add_option("--out", spl.out, "Output directory")->required();

  TrainArgs trn;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", trn.data, "Dataset directory")->required();
  train->add_option("--config", trn.config, "Run config JSON");
  train->add_option("--fold", trn.fold, "Split manifest; trains on its train ids");
  train->add_option("--out", trn.out, "Output weights (.hw01)")->required();
  train->add_option("--log", trn.log, "Per-epoch CSV (default <out>.log.csv)");
  add_overrides(train, trn.overrides);

  PredictArgs prd;
  auto* predict = app.add_subcommand("predict", "Predict points for every image in a directory");
  predict->add_option("--weights", prd.weights, "Weights (.hw01)")->required();
  predict->add_option("--config", prd.config, "Run config (default <weights>.config.json)");
  predict->add_option("--data", prd.data, "Directory of .ppm/.pgm images")->required();
  predict->add_option("--out", prd.out, "Output directory")->required();
  predict->add_option("--threshold", prd.threshold, "Decode threshold");
  predict->add_flag("--heatmaps", prd.heatmaps, "Also write stage-2 heatmaps");

  EvalArgs evl;
  auto* eval = app.add_subcommand("eval", "Match predictions to ground truth and report metrics");
  eval->add_option("--pred", evl.pred, "Directory of predicted points")->required();
  eval->add_option("--gt", evl.gt, "Directory of ground-truth points")->required();
  eval->add_option("--radii", evl.radii, "Comma-separated radii (default 6,8,10)");
  eval->add_option("--mode", evl.mode, "micro, macro or both comma-separated");
  eval->add_option("--out", evl.out, "Output metrics CSV; JSON goes beside it")->required();
  eval->add_option("--dump", evl.dump, "Match dump directory (default <out dir>/matches)");
  eval->add_option("--config", evl.config, "Run config JSON");

  GradcheckArgs gck;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare tape gradients with finite differences");
  gradcheck->add_option("--scope", gck.scope, "Comma-separated: ops, layers, model");
  gradcheck->add_option("--tol", gck.tol, "Relative error tolerance (default 1e-4, model 1e-3)");
  gradcheck->add_option("--out", gck.out, "Also write the table here");
  gradcheck->add_option("--inject-fault", gck.fault)->group("");

  OverlayArgs ovl;
  auto* overlay = app.add_subcommand("overlay", "Draw TP/FP/FN circles from a match dump");
  overlay->add_option("--image", ovl.image, "Input .ppm/.pgm")->required();
  overlay->add_option("--matches", ovl.matches, "Match dump JSON")->required();
  overlay->add_option("--out", ovl.out, "Output .ppm")->required();

  XvalArgs xvl;
  auto* xval = app.add_subcommand("xval", "Group k-fold train and evaluate over a config grid");
  xval->add_option("--data", xvl.data, "Dataset directory")->required();
  xval->add_option("--config", xvl.config, "Run config JSON");
  xval->add_option("--out", xvl.out, "Output directory")->required();
  add_overrides(xval, xvl.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*encode) return cmd_encode(enc);
    if (*decode) return cmd_decode(dec);
    if (*synth) return cmd_synth(syn);
    if (*split) return cmd_split(spl);
    if (*train) return cmd_train(trn);
    if (*predict) return cmd_predict(prd);
    if (*eval) return cmd_eval(evl);
    if (*gradcheck) return cmd_gradcheck(gck);
    if (*overlay) return cmd_overlay(ovl);
    if (*xval) return cmd_xval(xvl);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const VerificationFailure& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
