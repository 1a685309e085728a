#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ptdet/heatmap.hpp"

namespace ptdet {

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double distance = 0.0;
};

struct MatchReport {
  double radius = 0.0;
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_pred;  // false positives
  std::vector<std::size_t> unmatched_gt;    // false negatives

  std::size_t tp() const { return matches.size(); }
  std::size_t fp() const { return unmatched_pred.size(); }
  std::size_t fn() const { return unmatched_gt.size(); }
};

/**
 * Greedy radius-constrained matching. All (pred, gt) pairs closer than
 * `radius` (strictly) are visited by ascending distance, ties by (gt, pred)
 * index; a pair is accepted when neither end is taken yet.
 */
MatchReport match_points(const PointSet& pred, const PointSet& gt, double radius);

struct Rates {
  double ppv = 0.0;
  double tpr = 0.0;
  double f1 = 0.0;
};

/// PPV = TP/(TP+FP), TPR = TP/(TP+FN), F1 = harmonic mean. An empty denominator
/// gives 1 when the other error count is also zero and 0 otherwise.
Rates rates_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
Rates image_metrics(const MatchReport& report);

/// RMS over predicted points of the distance to the nearest ground-truth point.
/// Absent when there are no predictions or no ground truth.
std::optional<double> rmse_localization(const PointSet& pred, const PointSet& gt);
/// Same, but the plain mean of the nearest distances.
std::optional<double> mean_min_distance(const PointSet& pred, const PointSet& gt);

struct ImageEvaluation {
  std::string sample_id;
  MatchReport report;
  std::optional<double> rmse;
  std::optional<double> mean_min_dist;
  bool has_predictions = false;
  bool flagged = false;  // predictions on an image without ground truth
};

ImageEvaluation evaluate_image(const PointSet& pred, const PointSet& gt, double radius, std::string sample_id = {});

enum class Pooling { micro, macro };
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view name);

struct MetricsReport {
  double radius = 0.0;
  Pooling mode = Pooling::micro;
  double ppv = 0.0;
  double tpr = 0.0;
  double f1 = 0.0;
  std::optional<double> rmse;
  std::optional<double> mean_min_dist;
  std::size_t images_with_predictions = 0;  // images with a defined RMSE
  std::size_t images_total = 0;
  std::size_t flagged_images = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// Micro pools TP/FP/FN over images; macro averages per-image PPV and TPR. In both
/// modes F1 is the harmonic mean of the reported PPV and TPR. RMSE is the mean of
/// per-image values over images that have one.
MetricsReport aggregate(const std::vector<ImageEvaluation>& images, Pooling mode);

struct PredGtPair {
  std::string sample_id;
  PointSet pred;
  PointSet gt;
};

std::vector<MetricsReport> radius_sweep(const std::vector<PredGtPair>& pairs, const std::vector<double>& radii,
                                        Pooling mode);

struct ClosePointAnalysis {
  std::size_t close_total = 0;
  std::size_t close_matched = 0;
  std::size_t far_total = 0;
  std::size_t far_matched = 0;
  /// Fraction matched; absent for an empty subset.
  std::optional<double> tp_rate_close() const;
  std::optional<double> tp_rate_far() const;
};

/// A ground-truth point is "close" when another ground-truth point of the same
/// image lies within `closeness` pixels.
ClosePointAnalysis close_point_analysis(const std::vector<PredGtPair>& pairs, double closeness = 15.0,
                                        double radius = 6.0);

std::string metrics_csv(const std::vector<MetricsReport>& reports);
std::string metrics_json(const std::vector<MetricsReport>& reports);
/// Per-image dump of matches (pred/gt coordinates), false positives and negatives.
std::string match_dump_json(const PointSet& pred, const PointSet& gt, const MatchReport& report,
                            const std::string& sample_id);

}  // namespace ptdet
