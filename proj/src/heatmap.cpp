#include "ptdet/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ptdet {

using json = nlohmann::json;

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

PointSet::PointSet(int height, int width, std::vector<Point> points) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("PointSet: image dimensions must be positive");
  points_.reserve(points.size());
  for (const auto& p : points) add(p);
}

bool PointSet::contains(const Point& p) const {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 && p.x < width_ &&
         p.y < height_;
}

void PointSet::add(Point p) {
  if (!contains(p)) {
    std::ostringstream s;
    s << "point (" << p.x << ", " << p.y << ") lies outside the " << height_ << "x" << width_ << " image";
    throw std::invalid_argument(s.str());
  }
  points_.push_back(p);
}

std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::gaussian: return "gaussian";
    case Distribution::tanh: return "tanh";
    case Distribution::binary: return "binary";
  }
  return "?";
}

Distribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return Distribution::gaussian;
  if (name == "tanh") return Distribution::tanh;
  if (name == "binary") return Distribution::binary;
  throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

void DistributionSpec::validate() const {
  if (kind == Distribution::gaussian && !(sigma1 > 0.0)) throw std::invalid_argument("gaussian distribution needs sigma1 > 0");
  if (kind == Distribution::tanh && !(alpha > 0.0)) throw std::invalid_argument("tanh distribution needs alpha > 0");
}

double distribution_value(const DistributionSpec& spec, double r) {
  switch (spec.kind) {
    case Distribution::gaussian: return std::exp(-r * r / (2.0 * spec.sigma1 * spec.sigma1));
    case Distribution::tanh: return 1.0 - std::tanh(r / spec.alpha);
    case Distribution::binary: return r == 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> distribution_profile(const DistributionSpec& spec, std::span<const double> radii) {
  spec.validate();
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    if (r < 0.0) throw std::invalid_argument("distribution_profile: radii must be non-negative");
    out.push_back(distribution_value(spec, r));
  }
  return out;
}

std::pair<int, int> raster_position(const Point& p, int height, int width) {
  const int x = std::clamp(static_cast<int>(std::lround(p.x)), 0, width - 1);
  const int y = std::clamp(static_cast<int>(std::lround(p.y)), 0, height - 1);
  return {x, y};
}

Heatmap encode(const PointSet& points, const DistributionSpec& spec) {
  spec.validate();
  Heatmap out(points.height(), points.width(), 1, 0.0);
  if (spec.kind == Distribution::binary) {
    for (const auto& p : points.points()) {
      const auto [x, y] = raster_position(p, points.height(), points.width());
      out(y, x) = 1.0;
    }
    return out;
  }
  for (const auto& p : points.points()) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const double v = distribution_value(spec, std::hypot(x - p.x, y - p.y));
        if (v > out(y, x)) out(y, x) = v;
      }
    }
  }
  return out;
}

void require_heatmap(const Grid& g, const char* what) {
  if (g.channels() != 1) throw ShapeError(std::string(what) + ": heatmap must have one channel, got " + g.shape_string());
}

PointSet decode(const Heatmap& heatmap, double threshold, int connectivity) {
  require_heatmap(heatmap, "decode");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("decode: threshold must lie in (0, 1)");
  if (connectivity != 4 && connectivity != 8) throw std::invalid_argument("decode: connectivity must be 4 or 8");

  const int h = heatmap.height(), w = heatmap.width();
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<Point> centroids;
  std::vector<std::pair<int, int>> stack;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (heatmap(y0, x0) < threshold || label[y0 * w + x0] >= 0) continue;
      const int id = static_cast<int>(centroids.size());
      double mass = 0.0, mx = 0.0, my = 0.0;
      stack.assign(1, {x0, y0});
      label[y0 * w + x0] = id;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        const double v = heatmap(y, x);
        mass += v;
        mx += v * x;
        my += v * y;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (label[ny * w + nx] >= 0 || heatmap(ny, nx) < threshold) continue;
            label[ny * w + nx] = id;
            stack.emplace_back(nx, ny);
          }
        }
      }
      centroids.push_back({mx / mass, my / mass});
    }
  }
  std::sort(centroids.begin(), centroids.end(),
            [](const Point& a, const Point& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  return PointSet(h, w, std::move(centroids));
}

// --- point files ------------------------------------------------------------

namespace {

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ": malformed JSON: " + e.what());
  }
}

int require_dim(const json& doc, const char* key, const std::string& source) {
  if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() <= 0) {
    throw std::runtime_error(source + ": missing or invalid \"" + key + "\"");
  }
  return doc[key].get<int>();
}

Point read_xy(const json& pair, const std::string& where) {
  if (!pair.is_array() || pair.size() < 2 || !pair[0].is_number() || !pair[1].is_number()) {
    throw std::runtime_error(where + ": expected an [x, y] coordinate pair");
  }
  return {pair[0].get<double>(), pair[1].get<double>()};
}

void add_checked(PointSet& set, Point p, const std::string& where) {
  try {
    set.add(p);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

}  // namespace

std::string points_to_json(const PointSet& points) {
  json doc;
  doc["image_height"] = points.height();
  doc["image_width"] = points.width();
  doc["points"] = json::array();
  for (const auto& p : points.points()) doc["points"].push_back({p.x, p.y});
  return doc.dump(2) + "\n";
}

PointSet points_from_json(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  PointSet set(require_dim(doc, "image_height", source), require_dim(doc, "image_width", source));
  if (!doc.contains("points") || !doc["points"].is_array()) throw std::runtime_error(source + ": missing \"points\" array");
  for (std::size_t i = 0; i < doc["points"].size(); ++i) {
    const std::string where = source + ": points[" + std::to_string(i) + "]";
    add_checked(set, read_xy(doc["points"][i], where), where);
  }
  return set;
}

LabelmeResult parse_labelme(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  LabelmeResult result;
  result.points = PointSet(require_dim(doc, "imageHeight", source), require_dim(doc, "imageWidth", source));
  if (doc.contains("group_id") && doc["group_id"].is_string()) result.group_id = doc["group_id"].get<std::string>();
  if (doc.contains("imagePath") && doc["imagePath"].is_string()) result.image_path = doc["imagePath"].get<std::string>();
  if (!doc.contains("shapes")) return result;
  if (!doc["shapes"].is_array()) throw std::runtime_error(source + ": \"shapes\" must be an array");
  const auto& shapes = doc["shapes"];
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& shape = shapes[i];
    const std::string where = source + ": shapes[" + std::to_string(i) + "]";
    if (!shape.is_object() || shape.value("shape_type", std::string{}) != "point") {
      ++result.ignored_shapes;
      continue;
    }
    if (!shape.contains("points") || !shape["points"].is_array() || shape["points"].empty()) {
      throw std::runtime_error(where + ": point shape without coordinates");
    }
    add_checked(result.points, read_xy(shape["points"][0], where), where);
  }
  return result;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

PointSet load_points(const std::string& path) {
  const std::string text = read_text_file(path);
  const json doc = parse_json(text, path);
  if (doc.contains("shapes") || doc.contains("imageHeight")) return parse_labelme(text, path).points;
  return points_from_json(text, path);
}

void save_points(const std::string& path, const PointSet& points) { write_text_file(path, points_to_json(points)); }

}  // namespace ptdet
