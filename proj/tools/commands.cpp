#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ptdet/check_suite.hpp"
#include "ptdet/image_io.hpp"

namespace ptdet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

void atomic_write(const std::string& path, const std::function<void(const std::string& tmp)>& writer) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  try {
    writer(tmp);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw;
  }
}

void Overrides::apply(RunConfig& cfg) const {
  if (epochs) cfg.train.epochs = *epochs;
  if (variant) cfg.model.variant = *variant;
  if (depth) cfg.model.depth = *depth;
  if (base_channels) cfg.model.base_channels = *base_channels;
  if (threads) cfg.train.threads = *threads;
  if (batch_size) cfg.train.batch_size = *batch_size;
  if (learning_rate) cfg.train.learning_rate = *learning_rate;
  if (sigma1) cfg.model.sigma1 = *sigma1;
  if (sigma2) cfg.model.sigma2 = *sigma2;
  if (alpha) cfg.model.alpha = *alpha;
  if (distribution) cfg.model.distribution = parse_distribution(*distribution);
  if (seed) cfg.train.seed = *seed;
}

namespace {

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const std::string& path) const {
    json doc;
    doc["command"] = command_;
    doc["version"] = kVersion;
    doc["config"] = config;
    doc["seed"] = seed ? json(*seed) : json(nullptr);
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    atomic_write(path, [&](const std::string& tmp) { write_text_file(tmp, doc.dump(2) + "\n"); });
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
};

std::string manifest_for_file(const std::string& out) { return out + ".manifest.json"; }
std::string manifest_for_dir(const std::string& dir) { return (fs::path(dir) / "manifest.json").string(); }

void write_text_atomic(const std::string& path, const std::string& text) {
  atomic_write(path, [&](const std::string& tmp) { write_text_file(tmp, text); });
}

// Missing input files and directories are usage errors.
void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(flag) + ": no such file: " + path);
}

void require_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_directory(path)) throw UsageError(std::string(flag) + ": no such directory: " + path);
}

json config_json(const RunConfig& cfg) { return json::parse(run_config_json(cfg)); }

Grid as_rgb(const Grid& image) {
  if (image.channels() == 3) return image;
  if (image.channels() != 1) throw ShapeError("expected a grey or RGB image, got " + image.shape_string());
  Grid rgb(image.height(), image.width(), 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) rgb(y, x, c) = image(y, x);
  return rgb;
}

// Input dims follow the data unless the config pins them.
RunConfig config_for_data(const std::string& path, const Overrides* overrides, const std::vector<Sample>& data) {
  RunConfig base;
  base.model.input_height = base.model.input_width = -1;
  RunConfig cfg = path.empty() ? base : load_run_config(path, base);
  if (overrides) overrides->apply(cfg);
  if (data.empty()) throw std::runtime_error("dataset is empty");
  const int h = data.front().image.height(), w = data.front().image.width();
  for (const auto& s : data) {
    if (s.image.height() != h || s.image.width() != w) {
      throw std::runtime_error("sample " + s.sample_id + " is " + std::to_string(s.image.height()) + "x" +
                               std::to_string(s.image.width()) + ", expected " + std::to_string(h) + "x" +
                               std::to_string(w) + " like the first sample");
    }
  }
  if (cfg.model.input_height < 0) cfg.model.input_height = h;
  if (cfg.model.input_width < 0) cfg.model.input_width = w;
  cfg.validate();
  return cfg;
}

std::vector<Sample> select(const std::vector<Sample>& data, const std::vector<std::string>& ids) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : data) by_id[s.sample_id] = &s;
  std::vector<Sample> out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("fold lists unknown sample '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::map<std::string, fs::path> json_files(const std::string& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (p.extension() != ".json" || p.filename() == "manifest.json") continue;
    out[p.stem().string()] = p;
  }
  return out;
}

std::vector<std::pair<std::string, fs::path>> image_files(const std::string& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".ppm" || ext == ".pgm") out.emplace_back(entry.path().stem().string(), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

int cmd_encode(const EncodeArgs& a) {
  require_file(a.points, "points");
  if (a.out.empty()) throw UsageError("--out is required");
  DistributionSpec spec;
  try {
    spec.kind = parse_distribution(a.dist);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (spec.kind == Distribution::gaussian) {
    if (!a.sigma1) throw UsageError("--dist gaussian requires --sigma1");
    spec.sigma1 = *a.sigma1;
  } else if (spec.kind == Distribution::tanh) {
    if (!a.alpha) throw UsageError("--dist tanh requires --alpha");
    spec.alpha = *a.alpha;
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Manifest manifest("encode");
  const PointSet points = load_points(a.points);
  const Heatmap heat = encode(points, spec);
  atomic_write(a.out, [&](const std::string& tmp) { save_hm01(tmp, heat); });
  manifest.outputs.push_back(a.out);
  if (!a.pgm.empty()) {
    atomic_write(a.pgm, [&](const std::string& tmp) { write_pgm(tmp, heat, 65535); });
    manifest.outputs.push_back(a.pgm);
  }
  manifest.config = {{"dist", to_string(spec.kind)}, {"sigma1", spec.sigma1}, {"alpha", spec.alpha}};
  manifest.inputs.push_back(a.points);
  manifest.write(manifest_for_file(a.out));
  return 0;
}

int cmd_decode(const DecodeArgs& a) {
  require_file(a.heatmap, "heatmap");
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.connectivity != 4 && a.connectivity != 8) throw UsageError("--connectivity must be 4 or 8");
  if (!(a.threshold > 0.0 && a.threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");

  Manifest manifest("decode");
  const PointSet points = decode(load_hm01(a.heatmap), a.threshold, a.connectivity);
  write_text_atomic(a.out, points_to_json(points));
  std::cout << "x,y\n";
  for (const auto& p : points.points()) std::cout << fmt(p.x) << "," << fmt(p.y) << "\n";
  manifest.config = {{"threshold", a.threshold}, {"connectivity", a.connectivity}};
  manifest.inputs.push_back(a.heatmap);
  manifest.outputs.push_back(a.out);
  manifest.write(manifest_for_file(a.out));
  return 0;
}

int cmd_synth(const SynthArgs& a) {
  if (a.out.empty()) throw UsageError("--out is required");
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  SynthConfig& s = cfg.synth;
  if (a.n_images) s.n_images = *a.n_images;
  if (a.min_dots) s.min_dots = *a.min_dots;
  if (a.max_dots) s.max_dots = *a.max_dots;
  if (a.height) s.height = *a.height;
  if (a.width) s.width = *a.width;
  if (a.seed) s.seed = *a.seed;
  if (a.prefix) s.prefix = *a.prefix;

  Manifest manifest("synth");
  const auto samples = synth_dataset(s);
  fs::create_directories(a.out);
  write_dataset(a.out, samples);
  manifest.config = config_json(cfg)["synth"];
  manifest.seed = s.seed;
  if (!a.config.empty()) manifest.inputs.push_back(a.config);
  for (const auto& sample : samples) {
    manifest.outputs.push_back((fs::path(a.out) / (sample.sample_id + ".ppm")).string());
    manifest.outputs.push_back((fs::path(a.out) / (sample.sample_id + ".json")).string());
  }
  manifest.write(manifest_for_dir(a.out));
  return 0;
}

int cmd_split(const SplitArgs& a) {
  require_dir(a.data, "--data");
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.k < 2) throw UsageError("--k must be at least 2");

  Manifest manifest("split");
  const auto samples = read_dataset(a.data);
  const auto folds = group_kfold(samples, a.k);
  for (const auto& fold : folds) {
    const std::string path = (fs::path(a.out) / ("fold_" + std::to_string(fold.index) + ".json")).string();
    write_text_atomic(path, fold_manifest_json(fold));
    manifest.outputs.push_back(path);
  }
  manifest.config = {{"k", a.k}};
  manifest.inputs.push_back(a.data);
  manifest.write(manifest_for_dir(a.out));
  return 0;
}

int cmd_train(const TrainArgs& a) {
  require_dir(a.data, "--data");
  if (a.out.empty()) throw UsageError("--out is required");
  if (!a.config.empty()) require_file(a.config, "--config");

  Manifest manifest("train");
  std::vector<Sample> data = read_dataset(a.data);
  if (!a.fold.empty()) {
    require_file(a.fold, "--fold");
    const json fold = json::parse(read_text_file(a.fold));
    data = select(data, fold.at("train").get<std::vector<std::string>>());
    manifest.inputs.push_back(a.fold);
  }
  const RunConfig cfg = config_for_data(a.config, &a.overrides, data);

  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  const TrainResult result = train(data, cfg.model, cfg.train, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << " loss " << e.loss_total << " (L1 " << e.loss_l1 << ", L2 " << e.loss_l2
              << ") lr " << e.lr << "\n";
  });
  atomic_write(a.out, [&](const std::string& tmp) { save_weights(tmp, result.weights); });
  write_text_atomic(log_path, training_log_csv(result.log));
  const std::string config_path = a.out + ".config.json";
  write_text_atomic(config_path, run_config_json(cfg));

  manifest.config = config_json(cfg);
  manifest.seed = cfg.train.seed;
  manifest.inputs.push_back(a.data);
  if (!a.config.empty()) manifest.inputs.push_back(a.config);
  manifest.outputs = {a.out, log_path, config_path};
  manifest.write(manifest_for_file(a.out));
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  require_file(a.weights, "--weights");
  require_dir(a.data, "--data");
  if (a.out.empty()) throw UsageError("--out is required");
  const std::string config_path = a.config.empty() ? a.weights + ".config.json" : a.config;
  require_file(config_path, "--config");

  Manifest manifest("predict");
  RunConfig cfg = load_run_config(config_path);
  if (a.threshold) cfg.eval.threshold = *a.threshold;
  cfg.validate();
  const ModelWeights weights = load_weights(a.weights);
  const auto images = image_files(a.data);
  if (images.empty()) throw std::runtime_error("no .ppm or .pgm images in " + a.data);
  fs::create_directories(a.out);
  for (const auto& [stem, path] : images) {
    const Grid image = as_rgb(read_pnm(path.string()));
    const ForwardResult f = forward(weights, cfg.model, image);
    const PointSet points = decode(f.stage2, cfg.eval.threshold);
    const std::string out = (fs::path(a.out) / (stem + ".json")).string();
    write_text_atomic(out, points_to_json(points));
    manifest.outputs.push_back(out);
    if (a.heatmaps) {
      const std::string heat = (fs::path(a.out) / (stem + ".hm01")).string();
      atomic_write(heat, [&](const std::string& tmp) { save_hm01(tmp, f.stage2); });
      manifest.outputs.push_back(heat);
    }
    manifest.inputs.push_back(path.string());
  }
  manifest.config = config_json(cfg);
  manifest.inputs.insert(manifest.inputs.begin(), {a.weights, config_path});
  manifest.write(manifest_for_dir(a.out));
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  require_dir(a.pred, "--pred");
  require_dir(a.gt, "--gt");
  if (a.out.empty()) throw UsageError("--out is required");
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  try {
    if (!a.radii.empty()) cfg.eval.radii = parse_radii(a.radii);
    if (!a.mode.empty()) cfg.eval.modes = parse_modes(a.mode);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Manifest manifest("eval");
  const auto preds = json_files(a.pred);
  const auto gts = json_files(a.gt);
  std::vector<std::string> orphans;
  for (const auto& [stem, path] : preds)
    if (!gts.count(stem)) orphans.push_back("prediction without ground truth: " + path.string());
  for (const auto& [stem, path] : gts)
    if (!preds.count(stem)) orphans.push_back("ground truth without prediction: " + path.string());
  if (!orphans.empty()) {
    for (const auto& o : orphans) std::cerr << o << "\n";
    throw std::runtime_error(std::to_string(orphans.size()) + " unmatched file stem(s)");
  }
  if (preds.empty()) throw std::runtime_error("no .json predictions in " + a.pred);

  std::vector<PredGtPair> pairs;
  for (const auto& [stem, path] : preds) {
    PredGtPair pair{stem, load_points(path.string()), load_points(gts.at(stem).string())};
    if (pair.pred.height() != pair.gt.height() || pair.pred.width() != pair.gt.width()) {
      throw std::runtime_error(stem + ": prediction and ground truth disagree on image size");
    }
    pairs.push_back(std::move(pair));
    manifest.inputs.push_back(path.string());
    manifest.inputs.push_back(gts.at(stem).string());
  }

  std::vector<std::vector<MetricsReport>> per_mode;
  for (Pooling mode : cfg.eval.modes) per_mode.push_back(radius_sweep(pairs, cfg.eval.radii, mode));
  std::vector<MetricsReport> reports;
  for (std::size_t r = 0; r < cfg.eval.radii.size(); ++r)
    for (const auto& sweep : per_mode) reports.push_back(sweep[r]);

  const std::string csv = metrics_csv(reports);
  const std::string json_path = fs::path(a.out).replace_extension(".json").string();
  write_text_atomic(a.out, csv);
  write_text_atomic(json_path, metrics_json(reports));
  std::cout << csv;

  const fs::path dump_dir = a.dump.empty() ? fs::path(a.out).parent_path() / "matches" : fs::path(a.dump);
  const double dump_radius = cfg.eval.radii.front();
  for (const auto& pair : pairs) {
    const std::string path = (dump_dir / (pair.sample_id + ".json")).string();
    const MatchReport report = match_points(pair.pred, pair.gt, dump_radius);
    write_text_atomic(path, match_dump_json(pair.pred, pair.gt, report, pair.sample_id));
    manifest.outputs.push_back(path);
  }

  manifest.config = config_json(cfg)["eval"];
  manifest.outputs.insert(manifest.outputs.begin(), {a.out, json_path});
  manifest.write(manifest_for_file(a.out));
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  SuiteOptions opts;
  opts.scopes.clear();
  std::istringstream list(a.scope);
  for (std::string s; std::getline(list, s, ',');) {
    if (s != "ops" && s != "layers" && s != "model") throw UsageError("--scope: unknown scope '" + s + "'");
    opts.scopes.push_back(s);
  }
  if (opts.scopes.empty()) throw UsageError("--scope must name at least one of ops, layers, model");
  if (a.tol && !(*a.tol > 0.0)) throw UsageError("--tol must be positive");
  opts.tolerance = a.tol;
  opts.faulty = a.fault;

  Manifest manifest("gradcheck");
  std::vector<SuiteEntry> entries;
  try {
    entries = run_gradcheck_suite(opts);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::ostringstream table;
  table << "scope,check,max_rel_error,entries,tolerance,status\n";
  std::vector<std::string> failed;
  for (const auto& e : entries) {
    std::size_t n = 0;
    for (const auto& p : e.report.params) n += p.entries_checked;
    const bool ok = e.report.passed();
    table << e.scope << "," << e.name << "," << fmt(e.report.max_rel_error()) << "," << n << ","
          << fmt(e.report.tolerance) << "," << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) failed.push_back(e.name);
  }
  std::cout << table.str();
  if (!a.out.empty()) {
    write_text_atomic(a.out, table.str());
    manifest.config = {{"scope", a.scope},
                       {"tolerance", a.tol ? json(*a.tol) : json(nullptr)},
                       {"step", opts.step}};
    manifest.seed = opts.seed;
    manifest.outputs.push_back(a.out);
    manifest.write(manifest_for_file(a.out));
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    throw VerificationFailure("gradient check failed: " + names);
  }
  return 0;
}

namespace {

void draw_circle(Grid& image, double cx, double cy, const std::array<int, 3>& rgb) {
  constexpr double kRadius = 5.0;
  const int x0 = static_cast<int>(std::floor(cx - kRadius - 1)), x1 = static_cast<int>(std::ceil(cx + kRadius + 1));
  const int y0 = static_cast<int>(std::floor(cy - kRadius - 1)), y1 = static_cast<int>(std::ceil(cy + kRadius + 1));
  for (int y = std::max(0, y0); y <= std::min(image.height() - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(image.width() - 1, x1); ++x) {
      if (std::abs(std::hypot(x - cx, y - cy) - kRadius) >= 0.5) continue;
      for (int c = 0; c < 3; ++c) image(y, x, c) = rgb[c] / 255.0;
    }
}

Point xy(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw std::runtime_error(where + ": expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

int cmd_overlay(const OverlayArgs& a) {
  require_file(a.image, "--image");
  require_file(a.matches, "--matches");
  if (a.out.empty()) throw UsageError("--out is required");

  Manifest manifest("overlay");
  Grid image = as_rgb(read_pnm(a.image));
  json dump;
  try {
    dump = json::parse(read_text_file(a.matches));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(a.matches + ": " + e.what());
  }
  const std::array<int, 3> green{0, 200, 0}, red{220, 0, 0}, orange{255, 140, 0};
  const auto list = [&](const char* key) { return dump.contains(key) ? dump.at(key) : json::array(); };
  std::size_t i = 0;
  for (const auto& p : list("fn")) {
    const Point q = xy(p, a.matches + ": fn[" + std::to_string(i++) + "]");
    draw_circle(image, q.x, q.y, orange);
  }
  i = 0;
  for (const auto& p : list("fp")) {
    const Point q = xy(p, a.matches + ": fp[" + std::to_string(i++) + "]");
    draw_circle(image, q.x, q.y, red);
  }
  i = 0;
  for (const auto& m : list("tp")) {
    const std::string where = a.matches + ": tp[" + std::to_string(i++) + "]";
    if (!m.is_object() || !m.contains("pred")) throw std::runtime_error(where + ": missing \"pred\"");
    const Point q = xy(m.at("pred"), where + ".pred");
    draw_circle(image, q.x, q.y, green);
  }
  atomic_write(a.out, [&](const std::string& tmp) { write_ppm(tmp, image); });
  manifest.config = {{"circle_radius", 5}};
  manifest.inputs = {a.image, a.matches};
  manifest.outputs = {a.out};
  manifest.write(manifest_for_file(a.out));
  return 0;
}

namespace {

struct FoldScore {
  int fold = 0;
  std::vector<MetricsReport> reports;  // one per radius
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

int cmd_xval(const XvalArgs& a) {
  require_dir(a.data, "--data");
  if (a.out.empty()) throw UsageError("--out is required");
  if (!a.config.empty()) require_file(a.config, "--config");

  Manifest manifest("xval");
  const std::vector<Sample> data = read_dataset(a.data);
  const RunConfig cfg = config_for_data(a.config, &a.overrides, data);
  const auto folds = group_kfold(data, cfg.xval.folds);
  std::vector<XvalCell> grid = cfg.xval.grid;
  if (grid.empty()) {
    grid.push_back({cfg.model.sigma1, cfg.model.sigma2, cfg.model.distribution, cfg.model.alpha, cfg.model.variant});
  }
  const Pooling mode = cfg.eval.modes.front();

  std::ostringstream summary, per_fold;
  summary << "experiment,distribution,sigma1,sigma2,alpha,variant,radius,mode,ppv_mean,ppv_std,tpr_mean,tpr_std,f1_mean,"
             "f1_std\n";
  per_fold << "experiment,fold,radius,mode,ppv,tpr,f1,tp,fp,fn\n";

  for (std::size_t e = 0; e < grid.size(); ++e) {
    const std::string name = "E" + std::to_string(e + 1);
    ModelConfig model = cfg.model;
    model.sigma1 = grid[e].sigma1;
    model.sigma2 = grid[e].sigma2;
    model.distribution = grid[e].distribution;
    model.alpha = grid[e].alpha;
    model.variant = grid[e].variant;
    model.validate();

    auto run_fold = [&](const Fold& fold) {
      const TrainResult trained = train(select(data, fold.train_ids), model, cfg.train);
      std::vector<PredGtPair> pairs;
      for (const auto& s : select(data, fold.val_ids)) {
        pairs.push_back({s.sample_id, predict(trained.weights, model, s.image, cfg.eval.threshold), s.points});
      }
      return FoldScore{fold.index, radius_sweep(pairs, cfg.eval.radii, mode)};
    };

    std::vector<FoldScore> scores;
    for (std::size_t start = 0; start < folds.size(); start += cfg.xval.parallel_folds) {
      const std::size_t end = std::min(folds.size(), start + static_cast<std::size_t>(cfg.xval.parallel_folds));
      std::vector<std::future<FoldScore>> jobs;
      for (std::size_t f = start; f < end; ++f) {
        jobs.push_back(std::async(end - start > 1 ? std::launch::async : std::launch::deferred, run_fold,
                                  std::cref(folds[f])));
      }
      for (auto& j : jobs) scores.push_back(j.get());
      std::cerr << name << ": " << scores.size() << "/" << folds.size() << " folds done\n";
    }

    for (std::size_t r = 0; r < cfg.eval.radii.size(); ++r) {
      std::vector<double> ppv, tpr, f1;
      for (const auto& s : scores) {
        const MetricsReport& m = s.reports[r];
        ppv.push_back(m.ppv);
        tpr.push_back(m.tpr);
        f1.push_back(m.f1);
        per_fold << name << "," << s.fold << "," << fmt(m.radius) << "," << to_string(mode) << "," << fmt(m.ppv) << ","
                 << fmt(m.tpr) << "," << fmt(m.f1) << "," << m.tp << "," << m.fp << "," << m.fn << "\n";
      }
      summary << name << "," << to_string(model.distribution) << "," << fmt(model.sigma1) << "," << fmt(model.sigma2)
              << "," << fmt(model.alpha) << "," << model.variant << "," << fmt(cfg.eval.radii[r]) << ","
              << to_string(mode) << "," << fmt(mean_of(ppv)) << "," << fmt(std_of(ppv)) << "," << fmt(mean_of(tpr))
              << "," << fmt(std_of(tpr)) << "," << fmt(mean_of(f1)) << "," << fmt(std_of(f1)) << "\n";
    }
  }

  const std::string summary_path = (fs::path(a.out) / "xval.csv").string();
  const std::string folds_path = (fs::path(a.out) / "folds.csv").string();
  write_text_atomic(summary_path, summary.str());
  write_text_atomic(folds_path, per_fold.str());
  std::cout << summary.str();

  manifest.config = config_json(cfg);
  manifest.seed = cfg.train.seed;
  manifest.inputs.push_back(a.data);
  if (!a.config.empty()) manifest.inputs.push_back(a.config);
  manifest.outputs = {summary_path, folds_path};
  manifest.write(manifest_for_dir(a.out));
  return 0;
}

}  // namespace ptdet::cli
