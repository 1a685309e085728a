#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptdet/heatmap.hpp"
#include "ptdet/random.hpp"

namespace ptdet {

struct Sample {
  Grid image;  // H x W x 3, values in [0, 1]
  PointSet points;
  std::string group_id;
  std::string sample_id;
};

// --- labelme ingestion --------------------------------------------------------

struct LoadedSample {
  Sample sample;
  std::size_t ignored_shapes = 0;
};

/// Image (PPM/PGM) plus labelme point file. The sample id is the JSON file stem;
/// the group id is the document's "group_id" field, or "default".
LoadedSample load_labelme(const std::string& json_path, const std::string& image_path);

/// Every `<stem>.json` with a sibling `<stem>.ppm` in `dir`, sorted by stem.
std::vector<Sample> read_dataset(const std::string& dir);

/// Writes `<sample_id>.ppm` and a labelme-compatible `<sample_id>.json` per sample.
void write_dataset(const std::string& dir, const std::vector<Sample>& samples);
std::string labelme_json(const Sample& sample);

// --- group-level k-fold ---------------------------------------------------------

struct SampleKey {
  std::string sample_id;
  std::string group_id;
};

struct Fold {
  int index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

/**
 * Partitions groups into k folds, largest group first, each into the fold with
 * the fewest samples so far (lowest index on ties). Groups never straddle the
 * train/val boundary.
 */
std::vector<Fold> group_kfold(const std::vector<SampleKey>& samples, int k);
std::vector<Fold> group_kfold(const std::vector<Sample>& samples, int k);

std::string fold_manifest_json(const Fold& fold);

// --- augmentation ---------------------------------------------------------------

/// 2D affine map p' = A p + t on pixel coordinates.
struct Affine {
  double a = 1, b = 0, c = 0, d = 1;  // [a b; c d]
  double tx = 0, ty = 0;

  Point apply(const Point& p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  Affine inverse() const;
  /// this after `first`: p -> this(first(p))
  Affine after(const Affine& first) const;

  static Affine translation(double dx, double dy);
  static Affine rotation_about(double degrees, Point centre);
  static Affine shear_about(double shear, Point centre);
  static Affine hflip(int width);
  static Affine vflip(int height);
};

struct AugmentConfig {
  double probability = 0.5;
  bool hflip = true;
  bool vflip = true;
  double rotation_deg = 60.0;
  double translate_frac = 0.10;
  double shear = 0.1;
  double brightness = 0.2;
  double contrast_min = 0.3;
  double contrast_max = 0.5;
  double saturation_min = 0.5;
  double saturation_max = 2.0;
  double hue = 0.1;
  double pixel_shift = 0.01;

  void validate() const;
};

/// Resamples the image through `transform` (bilinear, zero fill) and maps the
/// points with the same transform; points leaving the frame are dropped.
Sample warp(const Sample& sample, const Affine& transform);

/// Each transform fires independently with `cfg.probability`. Geometric ones
/// (flips, rotation about the centre, shear, translation) move image and points
/// together; photometric ones touch the image only. Output clamped to [0, 1].
Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng);

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

// --- targets --------------------------------------------------------------------

struct TargetMasks {
  Heatmap heat;
  Heatmap binary;
};

/// Heatmap target from `spec` and the binary point mask, both rasterised from
/// (already transformed) point coordinates.
TargetMasks target_masks(const PointSet& points, const DistributionSpec& spec);

// --- synthetic data ---------------------------------------------------------------

struct SynthConfig {
  int n_images = 10;
  int height = 64;
  int width = 96;
  int min_dots = 3;
  int max_dots = 12;
  double min_separation = 10.0;
  int border_margin = 3;
  int n_groups = 5;
  std::uint64_t seed = 0;
  /// Id prefix, so several synthetic sets can share a directory.
  std::string prefix = "synth";
};

/// Smooth coloured background with mild noise and small bright dots; the point
/// labels are the exact dot centres. Sample i belongs to group i % n_groups.
std::vector<Sample> synth_dataset(const SynthConfig& cfg);

}  // namespace ptdet
