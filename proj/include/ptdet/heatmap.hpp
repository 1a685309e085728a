#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptdet/grid.hpp"

namespace ptdet {

/// Sub-pixel image position; x is the column, y the row, pixel centres at integers.
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b);

/// Points of one image. Every point satisfies 0 <= x < width and 0 <= y < height.
class PointSet {
 public:
  PointSet() = default;
  PointSet(int height, int width, std::vector<Point> points = {});

  int height() const { return height_; }
  int width() const { return width_; }
  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  void add(Point p);
  bool contains(const Point& p) const;

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Point> points_;
};

/// A single-channel grid with values in [0, 1].
using Heatmap = Grid;

enum class Distribution { gaussian, tanh, binary };

std::string_view to_string(Distribution d);
Distribution parse_distribution(std::string_view name);

struct DistributionSpec {
  Distribution kind = Distribution::gaussian;
  double sigma1 = 0.0;  // gaussian spread, pixels
  double alpha = 0.0;   // tanh spread, pixels

  static DistributionSpec gaussian(double sigma1) { return {Distribution::gaussian, sigma1, 0.0}; }
  static DistributionSpec tanh(double alpha) { return {Distribution::tanh, 0.0, alpha}; }
  static DistributionSpec binary() { return {Distribution::binary, 0.0, 0.0}; }

  void validate() const;
};

/// Value of the distribution at distance r from its centre: exp(-r^2 / 2 sigma^2)
/// for gaussian, 1 - tanh(r / alpha) for tanh. Binary has no radial profile.
double distribution_value(const DistributionSpec& spec, double r);
std::vector<double> distribution_profile(const DistributionSpec& spec, std::span<const double> radii);

/// Nearest integer pixel (column, row) of a point, clamped into the image.
std::pair<int, int> raster_position(const Point& p, int height, int width);

/// Rasterises points into a heatmap; overlapping distributions combine by max.
Heatmap encode(const PointSet& points, const DistributionSpec& spec);

/// Threshold, label connected components, return intensity-weighted centroids
/// sorted by (y, x).
PointSet decode(const Heatmap& heatmap, double threshold = 0.5, int connectivity = 8);

void require_heatmap(const Grid& g, const char* what);

// --- point files ------------------------------------------------------------

struct LabelmeResult {
  PointSet points;
  std::size_t ignored_shapes = 0;
  std::string group_id;    // empty when the file carries none
  std::string image_path;  // "imagePath" field, may be empty
};

/// Canonical {"image_height", "image_width", "points": [[x, y], ...]} document.
std::string points_to_json(const PointSet& points);
PointSet points_from_json(std::string_view text, const std::string& source = "<string>");

/// labelme document: point shapes are kept (first coordinate pair), other
/// shapes are counted as ignored. imageHeight and imageWidth are required.
LabelmeResult parse_labelme(std::string_view text, const std::string& source = "<string>");

/// Reads either format, detected by the presence of "shapes".
PointSet load_points(const std::string& path);
void save_points(const std::string& path, const PointSet& points);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace ptdet
