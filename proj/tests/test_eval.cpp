#include <algorithm>
#include <cmath>
#include <functional>

#include "doctest.h"
#include "json.hpp"
#include "ptdet/eval.hpp"
#include "support.hpp"

using namespace ptdet;

namespace {

PointSet pts(std::vector<Point> p, int h = 100, int w = 100) { return PointSet(h, w, std::move(p)); }

// Largest number of disjoint (pred, gt) pairs closer than radius, by exhaustive search.
std::size_t optimal_matches(const PointSet& pred, const PointSet& gt, double radius) {
  std::vector<bool> used(pred.size(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t g) -> std::size_t {
    if (g == gt.size()) return 0;
    std::size_t best = go(g + 1);
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (used[p] || !(distance(pred[p], gt[g]) < radius)) continue;
      used[p] = true;
      best = std::max(best, 1 + go(g + 1));
      used[p] = false;
    }
    return best;
  };
  return go(0);
}

void check_report_invariants(const MatchReport& r, const PointSet& pred, const PointSet& gt) {
  CHECK(r.tp() + r.fn() == gt.size());
  CHECK(r.tp() + r.fp() == pred.size());
  std::vector<int> pseen(pred.size(), 0), gseen(gt.size(), 0);
  for (const auto& m : r.matches) {
    ++pseen[m.pred];
    ++gseen[m.gt];
    CHECK(m.distance < r.radius);
    CHECK(m.distance == doctest::Approx(distance(pred[m.pred], gt[m.gt])));
  }
  for (auto i : r.unmatched_pred) ++pseen[i];
  for (auto i : r.unmatched_gt) ++gseen[i];
  for (int c : pseen) CHECK(c == 1);
  for (int c : gseen) CHECK(c == 1);
}

}  // namespace

TEST_CASE("matching fixtures") {
  const auto near = match_points(pts({{14, 10}}), pts({{10, 10}}), 6.0);
  CHECK(near.tp() == 1);
  CHECK(near.matches[0].distance == 4.0);

  const auto far = match_points(pts({{17, 10}}), pts({{10, 10}}), 6.0);
  CHECK(far.tp() == 0);
  CHECK(far.fp() == 1);
  CHECK(far.fn() == 1);

  const auto realloc = match_points(pts({{1, 0}, {2, 0}}), pts({{0, 0}, {5, 0}}), 6.0);
  CHECK(realloc.tp() == 2);
  REQUIRE(realloc.matches.size() == 2);
  CHECK(realloc.matches[0].pred == 0);
  CHECK(realloc.matches[0].gt == 0);
  CHECK(realloc.matches[1].pred == 1);
  CHECK(realloc.matches[1].gt == 1);
  CHECK(realloc.matches[1].distance == 3.0);

  const auto boundary = match_points(pts({{16, 10}}), pts({{10, 10}}), 6.0);
  CHECK(boundary.tp() == 0);
  CHECK(match_points(pts({{16, 10}}), pts({{10, 10}}), 6.0 + 1e-9).tp() == 1);

  CHECK(match_points(pts({}), pts({}), 6.0).tp() == 0);
  CHECK_THROWS(match_points(pts({}), pts({}), 0.0));
}

TEST_CASE("greedy tie-break prefers the lower gt index, then the lower pred index") {
  const auto r = match_points(pts({{5, 5}}), pts({{2, 5}, {8, 5}}), 6.0);
  REQUIRE(r.tp() == 1);
  CHECK(r.matches[0].gt == 0);
  const auto r2 = match_points(pts({{2, 5}, {8, 5}}), pts({{5, 5}}), 6.0);
  REQUIRE(r2.tp() == 1);
  CHECK(r2.matches[0].pred == 0);
}

TEST_CASE("matching properties on random clouds") {
  Rng rng(1);
  int greedy_below_optimal = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const PointSet pred = testing::random_points(rng, 40, 40, uniform_int(rng, 0, 6));
    const PointSet gt = testing::random_points(rng, 40, 40, uniform_int(rng, 0, 6));
    std::size_t prev_tp = 0;
    for (double radius : {6.0, 8.0, 10.0}) {
      const MatchReport r = match_points(pred, gt, radius);
      check_report_invariants(r, pred, gt);
      CHECK(r.tp() >= prev_tp);
      prev_tp = r.tp();
      const std::size_t best = optimal_matches(pred, gt, radius);
      CHECK(r.tp() <= best);
      CHECK(r.tp() + 1 >= best);
      if (r.tp() < best) ++greedy_below_optimal;
      if (pred.size() == 1 && gt.size() == 1) CHECK(r.tp() == best);
    }

    // set semantics: permuting inputs permutes indices only
    std::vector<Point> pp = pred.points(), gg = gt.points();
    std::reverse(pp.begin(), pp.end());
    std::rotate(gg.begin(), gg.begin() + (gg.empty() ? 0 : 1), gg.end());
    const MatchReport a = match_points(pred, gt, 8.0);
    const MatchReport b = match_points(PointSet(40, 40, pp), PointSet(40, 40, gg), 8.0);
    CHECK(a.tp() == b.tp());
    std::vector<double> da, db;
    for (const auto& m : a.matches) da.push_back(m.distance);
    for (const auto& m : b.matches) db.push_back(m.distance);
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    CHECK(da == db);
  }
  MESSAGE("greedy below optimal in " << greedy_below_optimal << " of 900 cases");
}

TEST_CASE("rate conventions") {
  const Rates r = rates_from_counts(2, 1, 2);
  CHECK(r.ppv == doctest::Approx(2.0 / 3.0));
  CHECK(r.tpr == doctest::Approx(0.5));
  CHECK(r.f1 == doctest::Approx(4.0 / 7.0));

  const Rates perfect = rates_from_counts(3, 0, 0);
  CHECK(perfect.ppv == 1.0);
  CHECK(perfect.tpr == 1.0);
  CHECK(perfect.f1 == 1.0);

  const Rates vacuous = rates_from_counts(0, 0, 0);
  CHECK(vacuous.ppv == 1.0);
  CHECK(vacuous.tpr == 1.0);
  CHECK(vacuous.f1 == 1.0);

  const Rates only_fp = rates_from_counts(0, 2, 0);
  CHECK(only_fp.ppv == 0.0);
  CHECK(only_fp.tpr == 0.0);
  CHECK(only_fp.f1 == 0.0);

  const Rates only_fn = rates_from_counts(0, 0, 2);
  CHECK(only_fn.ppv == 0.0);
  CHECK(only_fn.tpr == 0.0);

  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Rates x = rates_from_counts(rng_index(rng, 6), rng_index(rng, 6), rng_index(rng, 6));
    CHECK(x.f1 * (x.ppv + x.tpr) == doctest::Approx(2.0 * x.ppv * x.tpr));
    CHECK(x.f1 >= 0.0);
    CHECK(x.f1 <= 1.0);
  }
}

TEST_CASE("localisation error") {
  const PointSet g = pts({{1, 1}, {7, 3}});
  CHECK(*rmse_localization(g, g) == 0.0);
  CHECK(*rmse_localization(pts({{3, 4}}), pts({{0, 0}})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(*rmse_localization(pts({{1, 0}, {9, 0}}), pts({{0, 0}, {10, 0}})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*mean_min_distance(pts({{3, 4}, {0, 1}}), pts({{0, 0}})) == doctest::Approx(3.0));
  CHECK(*rmse_localization(pts({{3, 4}, {0, 1}}), pts({{0, 0}})) == doctest::Approx(std::sqrt(13.0)));
  CHECK_FALSE(rmse_localization(pts({}), g).has_value());
  CHECK_FALSE(rmse_localization(g, pts({})).has_value());
}

TEST_CASE("per-image evaluation flags predictions without ground truth") {
  const ImageEvaluation e = evaluate_image(pts({{1, 1}}), pts({}), 6.0, "x");
  CHECK(e.flagged);
  CHECK(e.has_predictions);
  CHECK_FALSE(e.rmse.has_value());
  const ImageEvaluation quiet = evaluate_image(pts({}), pts({{1, 1}}), 6.0);
  CHECK_FALSE(quiet.flagged);
  CHECK_FALSE(quiet.has_predictions);
}

TEST_CASE("aggregation") {
  // image A: TP 1, FN 1; image B: TP 1, FP 1
  const auto a = evaluate_image(pts({{10, 10}}), pts({{10, 11}, {50, 50}}), 6.0, "a");
  const auto b = evaluate_image(pts({{20, 20}, {80, 80}}), pts({{21, 20}}), 6.0, "b");
  const MetricsReport micro = aggregate({a, b}, Pooling::micro);
  const MetricsReport macro = aggregate({a, b}, Pooling::macro);
  CHECK(micro.ppv == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(macro.ppv == doctest::Approx(3.0 / 4.0).epsilon(1e-15));
  CHECK(micro.tp == 2);
  CHECK(micro.images_total == 2);
  CHECK(micro.images_with_predictions == 2);
  CHECK(micro.f1 * (micro.ppv + micro.tpr) == doctest::Approx(2 * micro.ppv * micro.tpr));
  CHECK(macro.f1 * (macro.ppv + macro.tpr) == doctest::Approx(2 * macro.ppv * macro.tpr));

  const MetricsReport single_micro = aggregate({a}, Pooling::micro);
  const MetricsReport single_macro = aggregate({a}, Pooling::macro);
  const Rates ra = image_metrics(a.report);
  CHECK(single_micro.f1 == doctest::Approx(ra.f1));
  CHECK(single_macro.f1 == doctest::Approx(ra.f1));
  CHECK(single_micro.ppv == single_macro.ppv);

  const auto e1 = evaluate_image(pts({}), pts({}), 6.0);
  const MetricsReport empty = aggregate({e1, e1}, Pooling::micro);
  CHECK(empty.f1 == 1.0);
  CHECK_FALSE(empty.rmse.has_value());
  CHECK(empty.images_with_predictions == 0);

  const auto c = evaluate_image(pts({{3, 4}}), pts({{0, 0}}), 6.0);
  const auto d = evaluate_image(pts({{1, 0}, {9, 0}}), pts({{0, 0}, {10, 0}}), 6.0);
  CHECK(*aggregate({c, d, e1}, Pooling::micro).rmse == doctest::Approx(3.0));
  CHECK_THROWS(aggregate({}, Pooling::micro));
  CHECK(parse_pooling("macro") == Pooling::macro);
  CHECK_THROWS(parse_pooling("weighted"));
}

TEST_CASE("radius sweep") {
  const std::vector<PredGtPair> pairs{{"a", pts({{17, 10}}), pts({{10, 10}})}};
  const auto sweep = radius_sweep(pairs, {6, 8, 10}, Pooling::micro);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].tp == 0);
  CHECK(sweep[0].fp == 1);
  CHECK(sweep[0].fn == 1);
  CHECK(sweep[1].tp == 1);
  CHECK(sweep[2].tp == 1);

  const std::vector<PredGtPair> perfect{{"a", pts({{1, 1}, {40, 2}}), pts({{1, 1}, {40, 2}})}};
  for (const auto& r : radius_sweep(perfect, {6, 8, 10}, Pooling::macro)) CHECK(r.f1 == 1.0);
  CHECK_THROWS(radius_sweep(pairs, {8, 6}, Pooling::micro));
  CHECK_THROWS(radius_sweep(pairs, {0, 6}, Pooling::micro));
}

TEST_CASE("close point analysis") {
  const std::vector<PredGtPair> spread{{"a", pts({}), pts({{0, 0}, {20, 0}, {0, 40}})}};
  const auto s = close_point_analysis(spread);
  CHECK(s.close_total == 0);
  CHECK_FALSE(s.tp_rate_close().has_value());
  CHECK(s.far_total == 3);

  const std::vector<PredGtPair> pair{{"a", pts({}), pts({{0, 0}, {10, 0}})}};
  CHECK(close_point_analysis(pair).close_total == 2);

  // detector finds the isolated points and misses the close pair
  const std::vector<PredGtPair> misses{{"a", pts({{50, 50}, {90, 10}}), pts({{10, 10}, {18, 10}, {50, 51}, {90, 12}})}};
  const auto m = close_point_analysis(misses);
  CHECK(m.close_total == 2);
  CHECK(m.close_matched == 0);
  CHECK(m.far_matched == 2);
  CHECK(*m.tp_rate_close() < *m.tp_rate_far());
}

TEST_CASE("metrics documents") {
  const auto a = evaluate_image(pts({{10, 10}, {30, 30}, {60, 60}}), pts({{10, 11}, {30, 29}, {80, 80}, {5, 90}}), 6.0);
  const MetricsReport r = aggregate({a}, Pooling::micro);
  CHECK(r.f1 == doctest::Approx(4.0 / 7.0));
  const std::string csv = metrics_csv({r});
  CHECK(csv.rfind("radius,mode,ppv,tpr,f1,rmse,mean_min_dist,images_with_predictions,images_total\n", 0) == 0);
  CHECK(csv.find("0.5714285714") != std::string::npos);
  const auto doc = nlohmann::json::parse(metrics_json({r}));
  CHECK(doc[0]["f1"].get<double>() == doctest::Approx(4.0 / 7.0));
  CHECK(doc[0]["mode"] == "micro");

  const PointSet pred = pts({{1, 0}, {2, 0}, {60, 60}});
  const PointSet gt = pts({{0, 0}, {5, 0}, {30, 30}});
  const auto dump = nlohmann::json::parse(match_dump_json(pred, gt, match_points(pred, gt, 6.0), "img"));
  CHECK(dump["image"] == "img");
  CHECK(dump["tp"].size() == 2);
  CHECK(dump["fp"].size() == 1);
  CHECK(dump["fn"].size() == 1);
  CHECK(dump["fp"][0][0].get<double>() == 60.0);
}
