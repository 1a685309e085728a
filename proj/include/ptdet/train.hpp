#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptdet/data.hpp"
#include "ptdet/model.hpp"

namespace ptdet {

struct TrainConfig {
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  double plateau_threshold = 1e-4;  // relative improvement that counts
  int epochs = 50;
  int batch_size = 2;
  std::uint64_t seed = 0;
  bool augment = false;
  AugmentConfig augmentation;
  /// Batch items processed concurrently; results do not depend on this.
  int threads = 1;

  void validate() const;
};

struct AdamState {
  std::vector<Grid> m;
  std::vector<Grid> v;
};

/// One Adam update with bias correction; `t` is the 1-based step index.
void adam_step(ModelWeights& weights, std::span<const Grid> grads, AdamState& state, long t, const TrainConfig& cfg,
               double learning_rate);

/// Reduce-on-plateau: the rate is multiplied by `plateau_factor` once the loss
/// has failed to improve on the best value by `plateau_threshold` (relative)
/// for `plateau_patience` consecutive epochs. The counter restarts after each
/// reduction.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, const TrainConfig& cfg);

  /// Feeds one epoch loss; returns the rate for the next epoch.
  double observe(double loss);
  double learning_rate() const { return lr_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  std::optional<double> best_;
  int bad_epochs_ = 0;
};

/// Replays `history` through a PlateauScheduler and returns `current_lr`, scaled
/// by the factor if the final epoch triggers a reduction.
double lr_schedule(std::span<const double> history, double current_lr, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_l1 = 0.0;
  double loss_l2 = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<EpochLog> log;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossValues {
  double l1 = 0.0, l2 = 0.0, total = 0.0;
};

/// Loss and parameter gradients of one sample (targets built from its points).
LossValues sample_gradients(const ModelWeights& weights, const ModelConfig& cfg, const Sample& sample,
                            std::vector<Grid>* grads);

using EpochCallback = std::function<void(const EpochLog&)>;

/**
 * Minimises the mean of L1 + L2 over mini-batches with Adam. Data order,
 * augmentation draws and initialisation all derive from `train.seed`, so two
 * runs with the same inputs give identical weights and logs. The plateau
 * scheduler watches the mean training loss of each epoch.
 */
TrainResult train(const std::vector<Sample>& dataset, const ModelConfig& model, const TrainConfig& train,
                  const EpochCallback& on_epoch = {});

/// "epoch,loss_total,loss_l1,loss_l2,lr" with one row per epoch.
std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace ptdet
