#include "ptdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

#include "ptdet/random.hpp"

namespace ptdet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw std::invalid_argument("train: plateau_factor must lie in (0, 1)");
  if (plateau_patience < 1) throw std::invalid_argument("train: plateau_patience must be positive");
  if (epochs < 0 || batch_size < 1 || threads < 1) throw std::invalid_argument("train: epochs, batch_size, threads invalid");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    throw std::invalid_argument("train: invalid Adam hyperparameters");
  }
  if (augment) augmentation.validate();
}

void adam_step(ModelWeights& weights, std::span<const Grid> grads, AdamState& state, long t, const TrainConfig& cfg,
               double learning_rate) {
  if (t < 1) throw std::invalid_argument("adam_step: step index starts at 1");
  if (grads.size() != weights.params.size()) throw ShapeError("adam_step: gradient count does not match parameters");
  if (state.m.empty()) {
    for (const auto& p : weights.params) {
      state.m.emplace_back(p.value.height(), p.value.width(), p.value.channels(), 0.0);
      state.v.emplace_back(p.value.height(), p.value.width(), p.value.channels(), 0.0);
    }
  }
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Grid& w = weights.params[i].value;
    require_same_shape(w, grads[i], "adam_step");
    Grid& m = state.m[i];
    Grid& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = grads[i].data()[j];
      m.data()[j] = b1 * m.data()[j] + (1.0 - b1) * g;
      v.data()[j] = b2 * v.data()[j] + (1.0 - b2) * g * g;
      const double mhat = m.data()[j] / c1;
      const double vhat = v.data()[j] / c2;
      w.data()[j] -= learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double initial_lr, const TrainConfig& cfg)
    : lr_(initial_lr), factor_(cfg.plateau_factor), patience_(cfg.plateau_patience), threshold_(cfg.plateau_threshold) {}

double PlateauScheduler::observe(double loss) {
  if (!best_ || loss < *best_ - threshold_ * std::abs(*best_)) {
    best_ = loss;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

double lr_schedule(std::span<const double> history, double current_lr, const TrainConfig& cfg) {
  if (history.empty()) throw std::invalid_argument("lr_schedule: history must not be empty");
  PlateauScheduler s(1.0, cfg);
  double before = 1.0;
  for (double loss : history) {
    before = s.learning_rate();
    s.observe(loss);
  }
  return s.learning_rate() < before ? current_lr * cfg.plateau_factor : current_lr;
}

LossValues sample_gradients(const ModelWeights& weights, const ModelConfig& cfg, const Sample& sample,
                            std::vector<Grid>* grads) {
  const TargetMasks targets = target_masks(sample.points, cfg.target_spec());
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(weights.params.size());
  for (const auto& p : weights.params) ids.push_back(grads ? tape.parameter(p.value) : tape.constant(p.value));
  const ForwardNodes f = forward(tape, ids, cfg, tape.constant(sample.image));
  const LossNodes loss = loss_total(tape, f.stage1, f.stage2, targets.heat, targets.binary, cfg.loss_config());
  LossValues values{tape.value(loss.l1).data()[0], tape.value(loss.l2).data()[0], tape.value(loss.total).data()[0]};
  if (grads && std::isfinite(values.total)) {
    tape.backward(loss.total);
    grads->clear();
    for (NodeId id : ids) grads->push_back(tape.grad(id));
  }
  return values;
}

TrainResult train(const std::vector<Sample>& dataset, const ModelConfig& model, const TrainConfig& train,
                  const EpochCallback& on_epoch) {
  model.validate();
  train.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  for (const auto& s : dataset) {
    if (s.image.height() != model.input_height || s.image.width() != model.input_width ||
        s.image.channels() != model.input_channels) {
      throw ShapeError("train: sample " + s.sample_id + " has shape " + s.image.shape_string() +
                       ", model expects " + std::to_string(model.input_height) + "x" +
                       std::to_string(model.input_width) + "x" + std::to_string(model.input_channels));
    }
  }

  TrainResult result;
  result.weights = build_model(model, derive_seed(train.seed, "init"));
  AdamState adam;
  PlateauScheduler scheduler(train.learning_rate, train);
  Rng order_rng(derive_seed(train.seed, "order"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_index(order_rng, i)]);
    const double lr = scheduler.learning_rate();
    LossValues epoch_sum;
    std::size_t seen = 0;

    for (std::size_t start = 0, batch = 0; start < order.size(); start += train.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      const std::size_t n = end - start;
      std::vector<LossValues> losses(n);
      std::vector<std::vector<Grid>> grads(n);

      auto run_item = [&](std::size_t k) {
        const Sample& src = dataset[order[start + k]];
        if (!train.augment) {
          losses[k] = sample_gradients(result.weights, model, src, &grads[k]);
          return;
        }
        Rng item_rng(derive_seed(train.seed, "augment:" + std::to_string(epoch) + ":" + src.sample_id));
        losses[k] = sample_gradients(result.weights, model, augment(src, train.augmentation, item_rng), &grads[k]);
      };

      try {
        if (train.threads > 1 && n > 1) {
          std::vector<std::future<void>> jobs;
          for (std::size_t k = 0; k < n; ++k) jobs.push_back(std::async(std::launch::async, run_item, k));
          for (auto& j : jobs) j.get();
        } else {
          for (std::size_t k = 0; k < n; ++k) run_item(k);
        }
      } catch (const std::domain_error& e) {
        throw TrainingError("non-finite value in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                            ": " + e.what());
      }

      std::vector<Grid> mean_grad = std::move(grads[0]);
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(losses[k].total)) {
          throw TrainingError("loss became NaN in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                              " (sample " + dataset[order[start + k]].sample_id + ")");
        }
        epoch_sum.l1 += losses[k].l1;
        epoch_sum.l2 += losses[k].l2;
        epoch_sum.total += losses[k].total;
        if (k == 0) continue;
        for (std::size_t p = 0; p < mean_grad.size(); ++p)
          for (std::size_t j = 0; j < mean_grad[p].size(); ++j) mean_grad[p].data()[j] += grads[k][p].data()[j];
      }
      for (auto& g : mean_grad)
        for (double& v : g.values()) v /= static_cast<double>(n);
      adam_step(result.weights, mean_grad, adam, ++step, train, lr);
      seen += n;
    }

    EpochLog entry{epoch, epoch_sum.total / seen, epoch_sum.l1 / seen, epoch_sum.l2 / seen, lr};
    result.log.push_back(entry);
    scheduler.observe(entry.loss_total);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream s;
  s.precision(17);
  s << "epoch,loss_total,loss_l1,loss_l2,lr\n";
  for (const auto& e : log) s << e.epoch << "," << e.loss_total << "," << e.loss_l1 << "," << e.loss_l2 << "," << e.lr << "\n";
  return s.str();
}

}  // namespace ptdet
