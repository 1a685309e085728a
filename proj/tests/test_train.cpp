#include <cmath>
#include <limits>

#include "doctest.h"
#include "ptdet/train.hpp"
#include "support.hpp"

using namespace ptdet;

namespace {

ModelConfig tiny_model(int variant = 1) {
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 4;
  cfg.input_height = 24;
  cfg.input_width = 24;
  cfg.variant = variant;
  return cfg;
}

std::vector<Sample> tiny_data(int n, std::uint64_t seed = 3) {
  SynthConfig sc;
  sc.n_images = n;
  sc.height = 24;
  sc.width = 24;
  sc.min_dots = 1;
  sc.max_dots = 3;
  sc.n_groups = 2;
  sc.seed = seed;
  return synth_dataset(sc);
}

}  // namespace

TEST_CASE("first Adam step moves by the learning rate") {
  ModelWeights w{{{"p", Grid(1, 1, 1, 0.3)}}};
  AdamState state;
  TrainConfig cfg;
  const std::vector<Grid> g{Grid(1, 1, 1, 0.5)};
  adam_step(w, g, state, 1, cfg, 0.001);
  const double expected = 0.3 - 0.001 * 0.5 / (0.5 + 1e-8);
  CHECK(w.params[0].value.data()[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(state.m[0].data()[0] == doctest::Approx(0.05));
  CHECK(state.v[0].data()[0] == doctest::Approx(0.00025));

  const std::vector<Grid> neg{Grid(1, 1, 1, -2.0)};
  ModelWeights w2{{{"p", Grid(1, 1, 1, 0.0)}}};
  AdamState s2;
  adam_step(w2, neg, s2, 1, cfg, 0.01);
  CHECK(w2.params[0].value.data()[0] == doctest::Approx(0.01).epsilon(1e-8));
}

TEST_CASE("zero gradients leave weights unchanged while moments decay") {
  ModelWeights w{{{"p", Grid(2, 2, 1, 0.7)}}};
  AdamState state;
  TrainConfig cfg;
  adam_step(w, std::vector<Grid>{Grid(2, 2, 1, 1.0)}, state, 1, cfg, 0.001);
  const ModelWeights after_first = w;
  const double m1 = state.m[0].data()[0], v1 = state.v[0].data()[0];

  ModelWeights fresh{{{"p", Grid(2, 2, 1, 0.7)}}};
  AdamState zero_state;
  adam_step(fresh, std::vector<Grid>{Grid(2, 2, 1, 0.0)}, zero_state, 1, cfg, 0.001);
  CHECK(fresh.params[0].value == Grid(2, 2, 1, 0.7));

  adam_step(w, std::vector<Grid>{Grid(2, 2, 1, 0.0)}, state, 2, cfg, 0.001);
  CHECK(state.m[0].data()[0] == doctest::Approx(0.9 * m1));
  CHECK(state.v[0].data()[0] == doctest::Approx(0.999 * v1));
  (void)after_first;
}

TEST_CASE("adam_step validates its inputs") {
  ModelWeights w{{{"p", Grid(2, 2, 1)}}};
  AdamState state;
  TrainConfig cfg;
  CHECK_THROWS(adam_step(w, std::vector<Grid>{Grid(2, 2, 1)}, state, 0, cfg, 0.001));
  CHECK_THROWS_AS(adam_step(w, std::vector<Grid>{Grid(3, 2, 1)}, state, 1, cfg, 0.001), ShapeError);
  CHECK_THROWS_AS(adam_step(w, std::vector<Grid>{}, state, 1, cfg, 0.001), ShapeError);
}

TEST_CASE("plateau schedule") {
  TrainConfig cfg;
  std::vector<double> improving;
  for (int i = 0; i < 30; ++i) improving.push_back(1.0 - 0.01 * i);
  for (std::size_t n = 1; n <= improving.size(); ++n) {
    CHECK(lr_schedule(std::span(improving).first(n), 0.001, cfg) == 0.001);
  }

  // best at epoch 1, then ten flat epochs: reduction fires on the tenth
  std::vector<double> flat(11, 0.5);
  for (std::size_t n = 1; n <= 10; ++n) CHECK(lr_schedule(std::span(flat).first(n), 0.001, cfg) == 0.001);
  CHECK(lr_schedule(flat, 0.001, cfg) == doctest::Approx(0.0001));

  PlateauScheduler s(0.001, cfg);
  int reductions = 0;
  double lr = 0.001;
  for (int i = 0; i < 11; ++i) {
    const double next = s.observe(0.5);
    if (next < lr) ++reductions;
    lr = next;
  }
  CHECK(reductions == 1);
  // after the reduction the counter restarts: nine more flat epochs are not enough
  for (int i = 0; i < 9; ++i) CHECK(s.observe(0.5) == doctest::Approx(0.0001));
  CHECK(s.bad_epochs() == 9);
  CHECK(s.observe(0.5) == doctest::Approx(0.00001));

  // an improvement below the relative threshold does not count
  PlateauScheduler tiny(1.0, cfg);
  tiny.observe(1.0);
  for (int i = 1; i <= 9; ++i) tiny.observe(1.0 - 1e-6 * i);
  CHECK(tiny.bad_epochs() == 9);
  CHECK(tiny.observe(1.0 - 1e-5) == doctest::Approx(0.1));

  CHECK_THROWS(lr_schedule(std::span<const double>{}, 0.001, cfg));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.plateau_factor = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("sample losses share L1 across variants") {
  const auto data = tiny_data(1);
  const ModelConfig v1 = tiny_model(1);
  const ModelConfig v2 = tiny_model(2);
  const ModelWeights w = build_model(v1, 4);
  const LossValues a = sample_gradients(w, v1, data[0], nullptr);
  const LossValues b = sample_gradients(w, v2, data[0], nullptr);
  CHECK(a.l1 == b.l1);
  CHECK(a.l2 != b.l2);
  CHECK(b.l2 >= 0.0);
  CHECK(b.l2 <= 1.0);
  CHECK(a.total == a.l1 + a.l2);
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto data = tiny_data(5);
  const ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 21;
  cfg.augment = true;
  const TrainResult a = train(data, model, cfg);
  const TrainResult b = train(data, model, cfg);
  CHECK(a.weights == b.weights);
  CHECK(training_log_csv(a.log) == training_log_csv(b.log));

  cfg.threads = 2;
  const TrainResult c = train(data, model, cfg);
  CHECK(c.weights == a.weights);

  cfg.threads = 1;
  cfg.seed = 22;
  CHECK_FALSE(train(data, model, cfg).weights == a.weights);
}

TEST_CASE("training log") {
  const auto data = tiny_data(3);
  TrainConfig cfg;
  cfg.epochs = 2;
  int calls = 0;
  const TrainResult r = train(data, tiny_model(2), cfg, [&](const EpochLog&) { ++calls; });
  CHECK(calls == 2);
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[0].epoch == 1);
  CHECK(r.log[0].lr == 0.001);
  for (const auto& e : r.log) {
    CHECK(e.loss_l2 >= 0.0);
    CHECK(e.loss_l2 <= 1.0);
    CHECK(e.loss_total == doctest::Approx(e.loss_l1 + e.loss_l2));
  }
  const std::string csv = training_log_csv(r.log);
  CHECK(csv.rfind("epoch,loss_total,loss_l1,loss_l2,lr\n1,", 0) == 0);
}

TEST_CASE("training rejects bad inputs and reports the failing batch") {
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS(train({}, tiny_model(), cfg));
  auto data = tiny_data(2);
  CHECK_THROWS_AS(train(data, ModelConfig{}, cfg), ShapeError);

  data[1].image(3, 3, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(data, tiny_model(), cfg);
    FAIL("expected a TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
  }
}

TEST_CASE("overfitting a single image") {
  const auto data = tiny_data(1, 9);
  const ModelConfig model = tiny_model();
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.01;
  const TrainResult r = train(data, model, cfg);
  const double first = r.log.front().loss_total;
  const double last = r.log.back().loss_total;
  MESSAGE("overfit loss " << first << " -> " << last);
  CHECK(last <= 0.1 * first);
  const PointSet found = predict(r.weights, model, data[0].image);
  CHECK(found.size() == data[0].points.size());
  for (const Point& p : data[0].points.points()) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point& q : found.points()) best = std::min(best, distance(p, q));
    CHECK(best < 6.0);
  }
}
