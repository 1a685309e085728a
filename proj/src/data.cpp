#include "ptdet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "ptdet/image_io.hpp"

namespace ptdet {

namespace fs = std::filesystem;
using json = nlohmann::json;

// --- labelme ingestion --------------------------------------------------------

LoadedSample load_labelme(const std::string& json_path, const std::string& image_path) {
  LabelmeResult parsed = parse_labelme(read_text_file(json_path), json_path);
  Grid image = read_pnm(image_path);
  if (image.height() != parsed.points.height() || image.width() != parsed.points.width()) {
    throw std::runtime_error(json_path + ": label dimensions " + std::to_string(parsed.points.height()) + "x" +
                             std::to_string(parsed.points.width()) + " do not match image " + image.shape_string());
  }
  if (image.channels() == 1) {
    Grid rgb(image.height(), image.width(), 3);
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x)
        for (int c = 0; c < 3; ++c) rgb(y, x, c) = image(y, x);
    image = std::move(rgb);
  }
  LoadedSample out;
  out.sample.image = std::move(image);
  out.sample.points = std::move(parsed.points);
  out.sample.group_id = parsed.group_id.empty() ? "default" : parsed.group_id;
  out.sample.sample_id = fs::path(json_path).stem().string();
  out.ignored_shapes = parsed.ignored_shapes;
  return out;
}

std::vector<Sample> read_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir);
  std::vector<fs::path> labels;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json" && fs::exists(fs::path(entry.path()).replace_extension(".ppm"))) {
      labels.push_back(entry.path());
    }
  }
  std::sort(labels.begin(), labels.end());
  std::vector<Sample> out;
  out.reserve(labels.size());
  for (const auto& p : labels) {
    out.push_back(load_labelme(p.string(), fs::path(p).replace_extension(".ppm").string()).sample);
  }
  return out;
}

std::string labelme_json(const Sample& sample) {
  json doc;
  doc["version"] = "5.0.1";
  doc["flags"] = json::object();
  json shapes = json::array();
  for (const auto& p : sample.points.points()) {
    shapes.push_back({{"label", "suture"},
                      {"points", json::array({json::array({p.x, p.y})})},
                      {"group_id", nullptr},
                      {"shape_type", "point"},
                      {"flags", json::object()}});
  }
  doc["shapes"] = shapes;
  doc["imagePath"] = sample.sample_id + ".ppm";
  doc["imageData"] = nullptr;
  doc["imageHeight"] = sample.points.height();
  doc["imageWidth"] = sample.points.width();
  doc["group_id"] = sample.group_id;
  return doc.dump(2) + "\n";
}

void write_dataset(const std::string& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    const fs::path base = fs::path(dir) / s.sample_id;
    write_ppm(fs::path(base).replace_extension(".ppm").string(), s.image);
    write_text_file(fs::path(base).replace_extension(".json").string(), labelme_json(s));
  }
}

// --- group-level k-fold ---------------------------------------------------------

std::vector<Fold> group_kfold(const std::vector<SampleKey>& samples, int k) {
  if (k < 2) throw std::invalid_argument("group_kfold: k must be at least 2");
  std::vector<std::string> order;  // groups by first appearance
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& s : samples) {
    auto [it, inserted] = members.try_emplace(s.group_id);
    if (inserted) order.push_back(s.group_id);
    it->second.push_back(s.sample_id);
  }
  if (static_cast<int>(order.size()) < k) {
    throw std::invalid_argument("group_kfold: " + std::to_string(order.size()) + " distinct groups cannot fill " +
                                std::to_string(k) + " folds");
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return members[a].size() > members[b].size();
  });
  std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
  std::map<std::string, int> fold_of;
  for (const auto& g : order) {
    const auto target = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    fold_of[g] = target;
    load[static_cast<std::size_t>(target)] += members[g].size();
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) folds[static_cast<std::size_t>(f)].index = f;
  for (const auto& s : samples) {
    const int home = fold_of[s.group_id];
    for (auto& fold : folds) (fold.index == home ? fold.val_ids : fold.train_ids).push_back(s.sample_id);
  }
  return folds;
}

std::vector<Fold> group_kfold(const std::vector<Sample>& samples, int k) {
  std::vector<SampleKey> keys;
  keys.reserve(samples.size());
  for (const auto& s : samples) keys.push_back({s.sample_id, s.group_id});
  return group_kfold(keys, k);
}

std::string fold_manifest_json(const Fold& fold) {
  json doc;
  doc["fold"] = fold.index;
  doc["train"] = fold.train_ids;
  doc["val"] = fold.val_ids;
  return doc.dump(2) + "\n";
}

// --- augmentation ---------------------------------------------------------------

Affine Affine::inverse() const {
  const double det = a * d - b * c;
  if (std::abs(det) < 1e-12) throw std::domain_error("affine map is singular");
  Affine inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

Affine Affine::after(const Affine& first) const {
  Affine r;
  r.a = a * first.a + b * first.c;
  r.b = a * first.b + b * first.d;
  r.c = c * first.a + d * first.c;
  r.d = c * first.b + d * first.d;
  r.tx = a * first.tx + b * first.ty + tx;
  r.ty = c * first.tx + d * first.ty + ty;
  return r;
}

Affine Affine::translation(double dx, double dy) { return {1, 0, 0, 1, dx, dy}; }

Affine Affine::rotation_about(double degrees, Point centre) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  Affine r{cs, -sn, sn, cs, 0, 0};
  r.tx = centre.x - (cs * centre.x - sn * centre.y);
  r.ty = centre.y - (sn * centre.x + cs * centre.y);
  return r;
}

Affine Affine::shear_about(double shear, Point centre) { return {1, shear, 0, 1, -shear * centre.y, 0}; }

Affine Affine::hflip(int width) { return {-1, 0, 0, 1, static_cast<double>(width - 1), 0}; }

Affine Affine::vflip(int height) { return {1, 0, 0, -1, 0, static_cast<double>(height - 1)}; }

void AugmentConfig::validate() const {
  if (probability < 0.0 || probability > 1.0) throw std::invalid_argument("augment: probability must lie in [0, 1]");
  if (contrast_min > contrast_max || saturation_min > saturation_max) {
    throw std::invalid_argument("augment: range minimum exceeds maximum");
  }
  if (rotation_deg < 0 || translate_frac < 0 || shear < 0 || brightness < 0 || hue < 0 || pixel_shift < 0) {
    throw std::invalid_argument("augment: symmetric ranges must be non-negative");
  }
}

namespace {

double sample_zero_fill(const Grid& img, double x, double y, int c) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int yy, int xx) {
    return (xx < 0 || yy < 0 || xx >= img.width() || yy >= img.height()) ? 0.0 : img(yy, xx, c);
  };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

void clamp_unit(Grid& g) {
  for (double& v : g.values()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

Sample warp(const Sample& sample, const Affine& transform) {
  const Affine inv = transform.inverse();
  const Grid& src = sample.image;
  Grid dst(src.height(), src.width(), src.channels());
  for (int y = 0; y < dst.height(); ++y)
    for (int x = 0; x < dst.width(); ++x) {
      const Point s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < dst.channels(); ++c) dst(y, x, c) = sample_zero_fill(src, s.x, s.y, c);
    }
  PointSet moved(sample.points.height(), sample.points.width());
  for (const auto& p : sample.points.points()) {
    const Point q = transform.apply(p);
    if (moved.contains(q)) moved.add(q);
  }
  return Sample{std::move(dst), std::move(moved), sample.group_id, sample.sample_id};
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = (g - b) / delta;
  } else if (mx == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const int w = sample.image.width(), h = sample.image.height();
  const Point centre{(w - 1) / 2.0, (h - 1) / 2.0};
  auto fires = [&] { return bernoulli(rng, cfg.probability); };

  // Every draw happens unconditionally so the stream layout does not depend on
  // which transforms fire.
  const bool do_hflip = fires() && cfg.hflip;
  const bool do_vflip = fires() && cfg.vflip;
  const bool do_rot = fires();
  const double angle = uniform(rng, -cfg.rotation_deg, cfg.rotation_deg);
  const bool do_shear = fires();
  const double shear = uniform(rng, -cfg.shear, cfg.shear);
  const bool do_translate = fires();
  const double tx = uniform(rng, -cfg.translate_frac, cfg.translate_frac) * w;
  const double ty = uniform(rng, -cfg.translate_frac, cfg.translate_frac) * h;
  const bool do_bright = fires();
  const double bright = uniform(rng, -cfg.brightness, cfg.brightness);
  const bool do_contrast = fires();
  const double contrast = uniform(rng, cfg.contrast_min, cfg.contrast_max);
  const bool do_sat = fires();
  const double sat = uniform(rng, cfg.saturation_min, cfg.saturation_max);
  const bool do_hue = fires();
  const double hue = uniform(rng, -cfg.hue, cfg.hue);
  const bool do_shift = fires();
  double shift[3];
  for (double& s : shift) s = uniform(rng, -cfg.pixel_shift, cfg.pixel_shift);

  Affine m;
  if (do_hflip) m = Affine::hflip(w).after(m);
  if (do_vflip) m = Affine::vflip(h).after(m);
  if (do_rot) m = Affine::rotation_about(angle, centre).after(m);
  if (do_shear) m = Affine::shear_about(shear, centre).after(m);
  if (do_translate) m = Affine::translation(tx, ty).after(m);

  const bool geometric = do_hflip || do_vflip || do_rot || do_shear || do_translate;
  Sample out = geometric ? warp(sample, m) : sample;
  Grid& img = out.image;

  if (do_bright)
    for (double& v : img.values()) v += bright;
  if (do_contrast) {
    const double mean = img.sum() / static_cast<double>(img.size());
    for (double& v : img.values()) v = mean + contrast * (v - mean);
  }
  if ((do_sat || do_hue) && img.channels() == 3) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double hh, ss, vv;
        rgb_to_hsv(std::clamp(img(y, x, 0), 0.0, 1.0), std::clamp(img(y, x, 1), 0.0, 1.0),
                   std::clamp(img(y, x, 2), 0.0, 1.0), hh, ss, vv);
        if (do_sat) ss = std::clamp(ss * sat, 0.0, 1.0);
        if (do_hue) hh += hue;
        hsv_to_rgb(hh, ss, vv, img(y, x, 0), img(y, x, 1), img(y, x, 2));
      }
  }
  if (do_shift)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < img.channels(); ++c) img(y, x, c) += shift[c % 3];
  clamp_unit(img);
  return out;
}

// --- targets --------------------------------------------------------------------

TargetMasks target_masks(const PointSet& points, const DistributionSpec& spec) {
  return {encode(points, spec), encode(points, DistributionSpec::binary())};
}

// --- synthetic data ---------------------------------------------------------------

std::vector<Sample> synth_dataset(const SynthConfig& cfg) {
  if (cfg.n_images < 1 || cfg.height < 1 || cfg.width < 1 || cfg.n_groups < 1) {
    throw std::invalid_argument("synth_dataset: counts and dimensions must be positive");
  }
  if (cfg.min_dots < 0 || cfg.max_dots < cfg.min_dots) throw std::invalid_argument("synth_dataset: invalid dot range");
  const double lo_x = cfg.border_margin, hi_x = cfg.width - 1 - cfg.border_margin;
  const double lo_y = cfg.border_margin, hi_y = cfg.height - 1 - cfg.border_margin;
  if (hi_x <= lo_x || hi_y <= lo_y) throw std::invalid_argument("synth_dataset: border margin leaves no room");

  Rng rng(cfg.seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.n_images));
  for (int i = 0; i < cfg.n_images; ++i) {
    Grid img(cfg.height, cfg.width, 3);
    for (int c = 0; c < 3; ++c) {
      const double base = uniform(rng, 0.15, 0.45);
      double fx[3], fy[3], phase[3], amp[3];
      for (int k = 0; k < 3; ++k) {
        fx[k] = uniform(rng, -2.0, 2.0);
        fy[k] = uniform(rng, -2.0, 2.0);
        phase[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        amp[k] = uniform(rng, 0.02, 0.08);
      }
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
          double v = base;
          for (int k = 0; k < 3; ++k) {
            v += amp[k] * std::cos(2.0 * std::numbers::pi * (fx[k] * x / cfg.width + fy[k] * y / cfg.height) + phase[k]);
          }
          img(y, x, c) = v;
        }
    }
    for (double& v : img.values()) v += 0.02 * normal(rng);

    const int n_dots = uniform_int(rng, cfg.min_dots, cfg.max_dots);
    std::vector<Point> centres;
    for (int d = 0; d < n_dots; ++d) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const Point p{uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y)};
        placed = std::all_of(centres.begin(), centres.end(),
                             [&](const Point& q) { return distance(p, q) >= cfg.min_separation; });
        if (placed) centres.push_back(p);
      }
      if (!placed) {
        throw std::runtime_error("synth_dataset: cannot place " + std::to_string(n_dots) + " dots " +
                                 std::to_string(cfg.min_separation) + " px apart after 1000 attempts");
      }
    }
    for (const auto& p : centres) {
      const double radius = uniform(rng, 1.0, 1.5);
      double colour[3];
      for (double& c : colour) c = std::clamp(0.9 + uniform(rng, -0.08, 0.08), 0.0, 1.0);
      const int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius - 1)));
      const int x1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(p.x + radius + 1)));
      const int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius - 1)));
      const int y1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(p.y + radius + 1)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          // coverage of an anti-aliased disc
          const double a = std::clamp(radius + 0.5 - std::hypot(x - p.x, y - p.y), 0.0, 1.0);
          for (int c = 0; c < 3; ++c) img(y, x, c) = (1 - a) * img(y, x, c) + a * colour[c];
        }
    }
    clamp_unit(img);

    char id[32];
    std::snprintf(id, sizeof id, "_%05d", i);
    out.push_back(Sample{std::move(img), PointSet(cfg.height, cfg.width, std::move(centres)),
                         "g" + std::to_string(i % cfg.n_groups), cfg.prefix + id});
  }
  return out;
}

}  // namespace ptdet
