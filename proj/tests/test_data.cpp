#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "ptdet/data.hpp"
#include "ptdet/image_io.hpp"
#include "support.hpp"

using namespace ptdet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ptdet_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<SampleKey> keys_from_sizes(const std::vector<int>& sizes) {
  std::vector<SampleKey> keys;
  for (std::size_t g = 0; g < sizes.size(); ++g)
    for (int i = 0; i < sizes[g]; ++i)
      keys.push_back({"s" + std::to_string(g) + "_" + std::to_string(i), "group" + std::to_string(g)});
  return keys;
}

void check_partition(const std::vector<SampleKey>& keys, const std::vector<Fold>& folds) {
  std::map<std::string, std::string> group_of;
  for (const auto& k : keys) group_of[k.sample_id] = k.group_id;
  std::multiset<std::string> all_val;
  for (const auto& f : folds) {
    std::set<std::string> val_groups, train_groups;
    for (const auto& id : f.val_ids) {
      all_val.insert(id);
      val_groups.insert(group_of.at(id));
    }
    for (const auto& id : f.train_ids) train_groups.insert(group_of.at(id));
    for (const auto& g : val_groups) CHECK(train_groups.count(g) == 0);
    CHECK(f.train_ids.size() + f.val_ids.size() == keys.size());
  }
  CHECK(all_val.size() == keys.size());
  for (const auto& k : keys) CHECK(all_val.count(k.sample_id) == 1);
}

}  // namespace

TEST_CASE("labelme loading") {
  const fs::path dir = scratch("labelme");
  Grid img(10, 12, 3, 0.25);
  write_ppm((dir / "a.ppm").string(), img);
  write_text_file((dir / "a.json").string(), R"({"imageHeight": 10, "imageWidth": 12, "group_id": "op7", "shapes": [
    {"shape_type": "point", "points": [[1, 2]]},
    {"shape_type": "point", "points": [[3.5, 4.25]]},
    {"shape_type": "point", "points": [[11, 9]]}]})");
  const LoadedSample a = load_labelme((dir / "a.json").string(), (dir / "a.ppm").string());
  CHECK(a.sample.points.size() == 3);
  CHECK(a.sample.group_id == "op7");
  CHECK(a.sample.sample_id == "a");
  CHECK(a.sample.image.channels() == 3);

  write_text_file((dir / "b.json").string(), R"({"imageHeight": 10, "imageWidth": 12, "shapes": []})");
  const LoadedSample b = load_labelme((dir / "b.json").string(), (dir / "a.ppm").string());
  CHECK(b.sample.points.empty());
  CHECK(b.sample.group_id == "default");

  write_text_file((dir / "c.json").string(), R"({"imageHeight": 10, "imageWidth": 12, "shapes": [
    {"shape_type": "polygon", "points": [[1, 1], [4, 1], [4, 4]]},
    {"shape_type": "point", "points": [[1, 1]]},
    {"shape_type": "point", "points": [[2, 2]]}]})");
  const LoadedSample c = load_labelme((dir / "c.json").string(), (dir / "a.ppm").string());
  CHECK(c.sample.points.size() == 2);
  CHECK(c.ignored_shapes == 1);

  write_text_file((dir / "d.json").string(), R"({"imageHeight": 11, "imageWidth": 12, "shapes": []})");
  CHECK_THROWS(load_labelme((dir / "d.json").string(), (dir / "a.ppm").string()));

  Grid gray(10, 12, 1, 0.5);
  write_pgm((dir / "g.pgm").string(), gray, 255);
  const LoadedSample g = load_labelme((dir / "b.json").string(), (dir / "g.pgm").string());
  CHECK(g.sample.image.channels() == 3);
}

TEST_CASE("dataset directory round trip") {
  SynthConfig sc;
  sc.n_images = 4;
  sc.height = 32;
  sc.width = 48;
  sc.n_groups = 2;
  sc.max_dots = 5;
  const auto samples = synth_dataset(sc);
  const fs::path dir = scratch("roundtrip");
  write_dataset(dir.string(), samples);
  const auto back = read_dataset(dir.string());
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].sample_id == samples[i].sample_id);
    CHECK(back[i].group_id == samples[i].group_id);
    CHECK(back[i].points == samples[i].points);
    CHECK(testing::max_abs_diff(back[i].image, samples[i].image) <= 0.5 / 255.0 + 1e-12);
  }
  CHECK_THROWS(read_dataset((dir / "missing").string()));
}

TEST_CASE("group k-fold examples") {
  const auto four = keys_from_sizes({3, 2, 4, 1});
  const auto f4 = group_kfold(four, 4);
  REQUIRE(f4.size() == 4);
  for (const auto& f : f4) {
    std::set<std::string> groups;
    for (const auto& id : f.val_ids) groups.insert(id.substr(0, id.find('_')));
    CHECK(groups.size() == 1);
  }
  check_partition(four, f4);

  const auto ten = keys_from_sizes({5, 5, 5, 5, 5, 5, 5, 5, 5, 5});
  const auto f5 = group_kfold(ten, 5);
  for (const auto& f : f5) CHECK(f.val_ids.size() == 10);
  check_partition(ten, f5);

  const auto skewed = keys_from_sizes({100, 1, 1, 1, 1});
  const auto f2 = group_kfold(skewed, 2);
  CHECK(f2[0].val_ids.size() == 100);
  CHECK(f2[1].val_ids.size() == 4);

  CHECK_THROWS(group_kfold(keys_from_sizes({2, 2}), 3));
  CHECK_THROWS(group_kfold(keys_from_sizes({2, 2}), 1));
  CHECK(group_kfold(four, 4)[2].val_ids == f4[2].val_ids);
}

TEST_CASE("group k-fold properties on random groupings") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int groups = uniform_int(rng, 3, 12);
    std::vector<int> sizes;
    for (int g = 0; g < groups; ++g) sizes.push_back(uniform_int(rng, 1, 20));
    const auto keys = keys_from_sizes(sizes);
    check_partition(keys, group_kfold(keys, uniform_int(rng, 2, groups)));
  }
}

TEST_CASE("fold manifest") {
  const Fold f{1, {"a", "b"}, {"c"}};
  const auto doc = nlohmann::json::parse(fold_manifest_json(f));
  CHECK(doc["fold"] == 1);
  CHECK(doc["train"].size() == 2);
  CHECK(doc["val"][0] == "c");
}

TEST_CASE("affine maps against independent formulas") {
  const Point c{47.5, 31.5};
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const double deg = uniform(rng, -60.0, 60.0);
    const Point p{uniform(rng, 0, 95), uniform(rng, 0, 63)};
    const double t = deg * 3.14159265358979323846 / 180.0;
    const double rx = c.x + std::cos(t) * (p.x - c.x) - std::sin(t) * (p.y - c.y);
    const double ry = c.y + std::sin(t) * (p.x - c.x) + std::cos(t) * (p.y - c.y);
    const Point q = Affine::rotation_about(deg, c).apply(p);
    CHECK(std::abs(q.x - rx) < 1e-9);
    CHECK(std::abs(q.y - ry) < 1e-9);
    const Point back = Affine::rotation_about(deg, c).inverse().apply(q);
    CHECK(distance(back, p) < 1e-9);
  }
  const Point at_centre = Affine::rotation_about(30.0, c).apply(c);
  CHECK(distance(at_centre, c) < 1e-12);
  CHECK(Affine::hflip(96).apply({10.0, 7.0}) == Point{85.0, 7.0});
  CHECK(Affine::vflip(64).apply({10.0, 7.0}) == Point{10.0, 56.0});
  const Affine comp = Affine::translation(2, 3).after(Affine::hflip(10));
  CHECK(comp.apply({1.0, 1.0}) == Point{10.0, 4.0});
  CHECK_THROWS(Affine{0, 0, 0, 0, 0, 0}.inverse());
}

TEST_CASE("augment with zero probability is the identity") {
  SynthConfig sc;
  sc.n_images = 1;
  const Sample s = synth_dataset(sc)[0];
  AugmentConfig cfg;
  cfg.probability = 0.0;
  Rng rng(3);
  const Sample out = augment(s, cfg, rng);
  CHECK(out.image == s.image);
  CHECK(out.points == s.points);
}

TEST_CASE("horizontal flip only") {
  SynthConfig sc;
  sc.n_images = 1;
  const Sample s = synth_dataset(sc)[0];
  AugmentConfig cfg;
  cfg.probability = 1.0;
  cfg.vflip = false;
  cfg.rotation_deg = cfg.translate_frac = cfg.shear = 0.0;
  cfg.brightness = cfg.hue = cfg.pixel_shift = 0.0;
  cfg.contrast_min = cfg.contrast_max = 1.0;
  cfg.saturation_min = cfg.saturation_max = 1.0;
  Rng rng(4);
  const Sample out = augment(s, cfg, rng);
  REQUIRE(out.points.size() == s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    CHECK(out.points[i].x == doctest::Approx(s.image.width() - 1 - s.points[i].x).epsilon(1e-12));
    CHECK(out.points[i].y == doctest::Approx(s.points[i].y).epsilon(1e-12));
  }
  for (int y = 0; y < s.image.height(); ++y)
    CHECK(std::abs(out.image(y, 0, 1) - s.image(y, s.image.width() - 1, 1)) < 1e-9);
}

TEST_CASE("warped images and mapped points agree") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const PointSet pts = testing::spaced_points(rng, 64, 96, 3, 14.0, 22.0);
    Sample s{encode(pts, DistributionSpec::gaussian(2.0)), pts, "g", "s"};
    const Point c{47.5, 31.5};
    const Affine m = Affine::translation(uniform(rng, -4, 4), uniform(rng, -4, 4))
                         .after(Affine::shear_about(uniform(rng, -0.1, 0.1), c))
                         .after(Affine::rotation_about(uniform(rng, -60, 60), c))
                         .after(trial % 2 ? Affine::hflip(96) : Affine{});
    const Sample out = warp(s, m);
    REQUIRE(out.points.size() == pts.size());
    const PointSet from_image = decode(out.image);
    CHECK(testing::recovers(out.points, from_image, 0.5));
    const PointSet from_labels = decode(encode(out.points, DistributionSpec::gaussian(2.0)));
    CHECK(testing::recovers(out.points, from_labels, 0.5));
  }
}

TEST_CASE("points leaving the frame are dropped") {
  Sample s{Grid(20, 20, 3, 0.5), PointSet(20, 20, {{2.0, 10.0}, {15.0, 10.0}}), "g", "s"};
  const Sample out = warp(s, Affine::translation(6.0, 0.0));
  REQUIRE(out.points.size() == 1);
  CHECK(out.points[0] == Point{8.0, 10.0});
  CHECK(out.image(10, 2, 0) == 0.0);
}

TEST_CASE("augmentation is bounded and deterministic") {
  SynthConfig sc;
  sc.n_images = 4;
  const auto samples = synth_dataset(sc);
  AugmentConfig cfg;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (const auto& s : samples) {
      Rng a(seed), b(seed);
      const Sample x = augment(s, cfg, a);
      const Sample y = augment(s, cfg, b);
      CHECK(x.image == y.image);
      CHECK(x.points == y.points);
      CHECK(x.image.all_finite());
      CHECK(x.image.min() >= 0.0);
      CHECK(x.image.max() <= 1.0);
      for (const Point& p : x.points.points()) CHECK(x.points.contains(p));
    }
  }
  AugmentConfig bad;
  bad.probability = 1.5;
  Rng rng(0);
  CHECK_THROWS(augment(samples[0], bad, rng));
}

TEST_CASE("hsv round trip") {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const double r = uniform01(rng), g = uniform01(rng), b = uniform01(rng);
    double h, s, v, r2, g2, b2;
    rgb_to_hsv(r, g, b, h, s, v);
    hsv_to_rgb(h, s, v, r2, g2, b2);
    CHECK(std::abs(r - r2) < 1e-12);
    CHECK(std::abs(g - g2) < 1e-12);
    CHECK(std::abs(b - b2) < 1e-12);
  }
}

TEST_CASE("target masks") {
  const TargetMasks empty = target_masks(PointSet(8, 8), DistributionSpec::gaussian(2.0));
  CHECK(empty.heat.max() == 0.0);
  CHECK(empty.binary.max() == 0.0);

  const TargetMasks one = target_masks(PointSet(8, 8, {{3.2, 4.7}}), DistributionSpec::gaussian(2.0));
  CHECK(one.binary.sum() == 1.0);
  CHECK(one.binary(5, 3) == 1.0);

  const TargetMasks merged =
      target_masks(PointSet(8, 8, {{3.2, 4.7}, {2.8, 5.4}, {6.0, 1.0}}), DistributionSpec::tanh(7.0));
  CHECK(merged.binary.sum() == 2.0);
  for (double v : merged.binary.values()) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("synthetic data") {
  SynthConfig sc;
  sc.n_images = 12;
  sc.seed = 77;
  const auto a = synth_dataset(sc);
  const auto b = synth_dataset(sc);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].points == b[i].points);
    CHECK(a[i].group_id == "g" + std::to_string(i % 5));
    CHECK(a[i].points.size() >= 3);
    CHECK(a[i].points.size() <= 12);
    CHECK(a[i].image.min() >= 0.0);
    CHECK(a[i].image.max() <= 1.0);
    for (std::size_t p = 0; p < a[i].points.size(); ++p)
      for (std::size_t q = p + 1; q < a[i].points.size(); ++q)
        CHECK(distance(a[i].points[p], a[i].points[q]) >= sc.min_separation);
    const PointSet decoded = decode(encode(a[i].points, DistributionSpec::gaussian(1.0)));
    CHECK(testing::recovers(a[i].points, decoded, 0.5));
  }
  CHECK(a[0].sample_id == "synth_00000");

  SynthConfig crowded = sc;
  crowded.height = 16;
  crowded.width = 16;
  crowded.min_dots = 12;
  CHECK_THROWS(synth_dataset(crowded));
}
