#include "ptdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace ptdet {

using json = nlohmann::json;

MatchReport match_points(const PointSet& pred, const PointSet& gt, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("match_points: radius must be positive");
  std::vector<Match> candidates;
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double d = distance(pred[p], gt[g]);
      if (d < radius) candidates.push_back({p, g, d});
    }
  std::sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    return std::tie(a.distance, a.gt, a.pred) < std::tie(b.distance, b.gt, b.pred);
  });
  MatchReport report;
  report.radius = radius;
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    report.matches.push_back(c);
  }
  for (std::size_t p = 0; p < pred.size(); ++p)
    if (!pred_used[p]) report.unmatched_pred.push_back(p);
  for (std::size_t g = 0; g < gt.size(); ++g)
    if (!gt_used[g]) report.unmatched_gt.push_back(g);
  return report;
}

Rates rates_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Rates r;
  r.ppv = tp + fp == 0 ? (fn == 0 ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.tpr = tp + fn == 0 ? (fp == 0 ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.ppv + r.tpr == 0.0 ? 0.0 : 2.0 * r.ppv * r.tpr / (r.ppv + r.tpr);
  return r;
}

Rates image_metrics(const MatchReport& report) { return rates_from_counts(report.tp(), report.fp(), report.fn()); }

namespace {

std::optional<std::vector<double>> nearest_distances(const PointSet& pred, const PointSet& gt) {
  if (pred.empty() || gt.empty()) return std::nullopt;
  std::vector<double> out;
  for (const auto& p : pred.points()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gt.points()) best = std::min(best, distance(p, g));
    out.push_back(best);
  }
  return out;
}

}  // namespace

std::optional<double> rmse_localization(const PointSet& pred, const PointSet& gt) {
  const auto d = nearest_distances(pred, gt);
  if (!d) return std::nullopt;
  double acc = 0.0;
  for (double v : *d) acc += v * v;
  return std::sqrt(acc / static_cast<double>(d->size()));
}

std::optional<double> mean_min_distance(const PointSet& pred, const PointSet& gt) {
  const auto d = nearest_distances(pred, gt);
  if (!d) return std::nullopt;
  double acc = 0.0;
  for (double v : *d) acc += v;
  return acc / static_cast<double>(d->size());
}

ImageEvaluation evaluate_image(const PointSet& pred, const PointSet& gt, double radius, std::string sample_id) {
  ImageEvaluation e;
  e.sample_id = std::move(sample_id);
  e.report = match_points(pred, gt, radius);
  e.rmse = rmse_localization(pred, gt);
  e.mean_min_dist = mean_min_distance(pred, gt);
  e.has_predictions = !pred.empty();
  e.flagged = gt.empty() && !pred.empty();
  return e;
}

std::string_view to_string(Pooling p) { return p == Pooling::micro ? "micro" : "macro"; }

Pooling parse_pooling(std::string_view name) {
  if (name == "micro") return Pooling::micro;
  if (name == "macro") return Pooling::macro;
  throw std::invalid_argument("unknown pooling mode '" + std::string(name) + "'");
}

MetricsReport aggregate(const std::vector<ImageEvaluation>& images, Pooling mode) {
  if (images.empty()) throw std::invalid_argument("aggregate: no images");
  MetricsReport m;
  m.radius = images.front().report.radius;
  m.mode = mode;
  m.images_total = images.size();
  double rmse_sum = 0.0, mean_sum = 0.0;
  Rates macro;
  for (const auto& img : images) {
    m.tp += img.report.tp();
    m.fp += img.report.fp();
    m.fn += img.report.fn();
    const Rates r = image_metrics(img.report);
    macro.ppv += r.ppv;
    macro.tpr += r.tpr;
    if (img.flagged) ++m.flagged_images;
    if (img.rmse) {
      ++m.images_with_predictions;
      rmse_sum += *img.rmse;
      mean_sum += *img.mean_min_dist;
    }
  }
  if (mode == Pooling::micro) {
    const Rates r = rates_from_counts(m.tp, m.fp, m.fn);
    m.ppv = r.ppv;
    m.tpr = r.tpr;
    m.f1 = r.f1;
  } else {
    const auto n = static_cast<double>(images.size());
    m.ppv = macro.ppv / n;
    m.tpr = macro.tpr / n;
    m.f1 = m.ppv + m.tpr > 0.0 ? 2.0 * m.ppv * m.tpr / (m.ppv + m.tpr) : 0.0;
  }
  if (m.images_with_predictions > 0) {
    m.rmse = rmse_sum / static_cast<double>(m.images_with_predictions);
    m.mean_min_dist = mean_sum / static_cast<double>(m.images_with_predictions);
  }
  return m;
}

std::vector<MetricsReport> radius_sweep(const std::vector<PredGtPair>& pairs, const std::vector<double>& radii,
                                        Pooling mode) {
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && radii[i] <= radii[i - 1])) {
      throw std::invalid_argument("radius_sweep: radii must be positive and ascending");
    }
  }
  std::vector<MetricsReport> out;
  for (double r : radii) {
    std::vector<ImageEvaluation> evals;
    evals.reserve(pairs.size());
    for (const auto& p : pairs) evals.push_back(evaluate_image(p.pred, p.gt, r, p.sample_id));
    out.push_back(aggregate(evals, mode));
  }
  return out;
}

std::optional<double> ClosePointAnalysis::tp_rate_close() const {
  if (close_total == 0) return std::nullopt;
  return static_cast<double>(close_matched) / static_cast<double>(close_total);
}

std::optional<double> ClosePointAnalysis::tp_rate_far() const {
  if (far_total == 0) return std::nullopt;
  return static_cast<double>(far_matched) / static_cast<double>(far_total);
}

ClosePointAnalysis close_point_analysis(const std::vector<PredGtPair>& pairs, double closeness, double radius) {
  ClosePointAnalysis a;
  for (const auto& pair : pairs) {
    const MatchReport report = match_points(pair.pred, pair.gt, radius);
    std::vector<bool> matched(pair.gt.size(), false);
    for (const auto& m : report.matches) matched[m.gt] = true;
    for (std::size_t i = 0; i < pair.gt.size(); ++i) {
      bool close = false;
      for (std::size_t j = 0; j < pair.gt.size() && !close; ++j)
        close = j != i && distance(pair.gt[i], pair.gt[j]) <= closeness;
      if (close) {
        ++a.close_total;
        a.close_matched += matched[i];
      } else {
        ++a.far_total;
        a.far_matched += matched[i];
      }
    }
  }
  return a;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string{}; }

}  // namespace

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream s;
  s << "radius,mode,ppv,tpr,f1,rmse,mean_min_dist,images_with_predictions,images_total\n";
  for (const auto& m : reports) {
    s << fmt(m.radius) << "," << to_string(m.mode) << "," << fmt(m.ppv) << "," << fmt(m.tpr) << "," << fmt(m.f1) << ","
      << fmt(m.rmse) << "," << fmt(m.mean_min_dist) << "," << m.images_with_predictions << "," << m.images_total << "\n";
  }
  return s.str();
}

std::string metrics_json(const std::vector<MetricsReport>& reports) {
  json doc = json::array();
  for (const auto& m : reports) {
    json row;
    row["radius"] = m.radius;
    row["mode"] = to_string(m.mode);
    row["ppv"] = m.ppv;
    row["tpr"] = m.tpr;
    row["f1"] = m.f1;
    row["rmse"] = m.rmse ? json(*m.rmse) : json(nullptr);
    row["mean_min_dist"] = m.mean_min_dist ? json(*m.mean_min_dist) : json(nullptr);
    row["images_with_predictions"] = m.images_with_predictions;
    row["images_total"] = m.images_total;
    row["flagged_images"] = m.flagged_images;
    row["tp"] = m.tp;
    row["fp"] = m.fp;
    row["fn"] = m.fn;
    doc.push_back(row);
  }
  return doc.dump(2) + "\n";
}

std::string match_dump_json(const PointSet& pred, const PointSet& gt, const MatchReport& report,
                            const std::string& sample_id) {
  json doc;
  doc["image"] = sample_id;
  doc["radius"] = report.radius;
  doc["image_height"] = gt.height();
  doc["image_width"] = gt.width();
  doc["tp"] = json::array();
  for (const auto& m : report.matches) {
    doc["tp"].push_back({{"pred", {pred[m.pred].x, pred[m.pred].y}},
                         {"gt", {gt[m.gt].x, gt[m.gt].y}},
                         {"distance", m.distance}});
  }
  doc["fp"] = json::array();
  for (std::size_t i : report.unmatched_pred) doc["fp"].push_back({pred[i].x, pred[i].y});
  doc["fn"] = json::array();
  for (std::size_t i : report.unmatched_gt) doc["fn"].push_back({gt[i].x, gt[i].y});
  return doc.dump(2) + "\n";
}

}  // namespace ptdet
