#include "ptdet/config.hpp"

#include <charconv>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace ptdet {

using json = nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw std::runtime_error(where_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& field) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      field = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::runtime_error(where_ + "." + key + ": wrong type");
    }
  }

  void read(const char* key, Distribution& field) {
    std::string name;
    read(key, name);
    if (!name.empty()) field = parse_distribution(name);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw std::runtime_error(where_ + ": unknown key \"" + key + "\"");
    }
  }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

void read_model(const json& doc, ModelConfig& m, const std::string& where) {
  Section s(doc, where);
  s.read("input_channels", m.input_channels);
  s.read("depth", m.depth);
  s.read("base_channels", m.base_channels);
  s.read("distribution", m.distribution);
  s.read("sigma1", m.sigma1);
  s.read("alpha", m.alpha);
  s.read("sigma2", m.sigma2);
  s.read("softargmax_temperature", m.softargmax_temperature);
  s.read("variant", m.variant);
  s.read("beta", m.beta);
  s.read("input_height", m.input_height);
  s.read("input_width", m.input_width);
  s.finish();
}

void read_augment(const json& doc, AugmentConfig& a, const std::string& where) {
  Section s(doc, where);
  s.read("probability", a.probability);
  s.read("hflip", a.hflip);
  s.read("vflip", a.vflip);
  s.read("rotation_deg", a.rotation_deg);
  s.read("translate_frac", a.translate_frac);
  s.read("shear", a.shear);
  s.read("brightness", a.brightness);
  s.read("contrast_min", a.contrast_min);
  s.read("contrast_max", a.contrast_max);
  s.read("saturation_min", a.saturation_min);
  s.read("saturation_max", a.saturation_max);
  s.read("hue", a.hue);
  s.read("pixel_shift", a.pixel_shift);
  s.finish();
}

void read_train(const json& doc, TrainConfig& t, const std::string& where) {
  Section s(doc, where);
  s.read("learning_rate", t.learning_rate);
  s.read("adam_beta1", t.adam_beta1);
  s.read("adam_beta2", t.adam_beta2);
  s.read("adam_eps", t.adam_eps);
  s.read("plateau_factor", t.plateau_factor);
  s.read("plateau_patience", t.plateau_patience);
  s.read("plateau_threshold", t.plateau_threshold);
  s.read("epochs", t.epochs);
  s.read("batch_size", t.batch_size);
  s.read("seed", t.seed);
  s.read("augment", t.augment);
  s.read("threads", t.threads);
  if (const json* aug = s.child("augmentation")) read_augment(*aug, t.augmentation, where + ".augmentation");
  s.finish();
}

void read_synth(const json& doc, SynthConfig& c, const std::string& where) {
  Section s(doc, where);
  s.read("n_images", c.n_images);
  s.read("height", c.height);
  s.read("width", c.width);
  s.read("min_dots", c.min_dots);
  s.read("max_dots", c.max_dots);
  s.read("min_separation", c.min_separation);
  s.read("border_margin", c.border_margin);
  s.read("n_groups", c.n_groups);
  s.read("seed", c.seed);
  s.read("prefix", c.prefix);
  s.finish();
}

void read_eval(const json& doc, EvalConfig& e, const std::string& where) {
  Section s(doc, where);
  s.read("radii", e.radii);
  std::vector<std::string> modes;
  s.read("modes", modes);
  if (!modes.empty()) {
    e.modes.clear();
    for (const auto& m : modes) e.modes.push_back(parse_pooling(m));
  }
  s.read("threshold", e.threshold);
  s.read("closeness", e.closeness);
  s.finish();
}

void read_xval(const json& doc, XvalConfig& x, const std::string& where) {
  Section s(doc, where);
  s.read("folds", x.folds);
  s.read("parallel_folds", x.parallel_folds);
  if (const json* grid = s.child("grid")) {
    if (!grid->is_array()) throw std::runtime_error(where + ".grid: expected an array");
    x.grid.clear();
    for (std::size_t i = 0; i < grid->size(); ++i) {
      XvalCell cell;
      Section c((*grid)[i], where + ".grid[" + std::to_string(i) + "]");
      c.read("sigma1", cell.sigma1);
      c.read("sigma2", cell.sigma2);
      c.read("distribution", cell.distribution);
      c.read("alpha", cell.alpha);
      c.read("variant", cell.variant);
      c.finish();
      x.grid.push_back(cell);
    }
  }
  s.finish();
}

json augment_json(const AugmentConfig& a) {
  return {{"probability", a.probability},     {"hflip", a.hflip},
          {"vflip", a.vflip},                 {"rotation_deg", a.rotation_deg},
          {"translate_frac", a.translate_frac}, {"shear", a.shear},
          {"brightness", a.brightness},       {"contrast_min", a.contrast_min},
          {"contrast_max", a.contrast_max},   {"saturation_min", a.saturation_min},
          {"saturation_max", a.saturation_max}, {"hue", a.hue},
          {"pixel_shift", a.pixel_shift}};
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (eval.radii.empty()) throw std::invalid_argument("eval: radii must not be empty");
  for (std::size_t i = 0; i < eval.radii.size(); ++i) {
    if (!(eval.radii[i] > 0.0) || (i > 0 && eval.radii[i] <= eval.radii[i - 1])) {
      throw std::invalid_argument("eval: radii must be positive and ascending");
    }
  }
  if (eval.modes.empty()) throw std::invalid_argument("eval: modes must not be empty");
  if (!(eval.threshold > 0.0 && eval.threshold < 1.0)) throw std::invalid_argument("eval: threshold must lie in (0, 1)");
  if (xval.folds < 2) throw std::invalid_argument("xval: folds must be at least 2");
  if (xval.parallel_folds < 1) throw std::invalid_argument("xval: parallel_folds must be positive");
}

RunConfig parse_run_config(std::string_view text, const std::string& source, RunConfig base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
  Section s(doc, source);
  if (const json* m = s.child("model")) read_model(*m, base.model, source + ": model");
  if (const json* t = s.child("train")) read_train(*t, base.train, source + ": train");
  if (const json* c = s.child("synth")) read_synth(*c, base.synth, source + ": synth");
  if (const json* e = s.child("eval")) read_eval(*e, base.eval, source + ": eval");
  if (const json* x = s.child("xval")) read_xval(*x, base.xval, source + ": xval");
  s.finish();
  return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  return parse_run_config(read_text_file(path), path, std::move(base));
}

std::string run_config_json(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const TrainConfig& t = cfg.train;
  const SynthConfig& c = cfg.synth;
  json doc;
  doc["model"] = {{"input_channels", m.input_channels},
                  {"depth", m.depth},
                  {"base_channels", m.base_channels},
                  {"distribution", to_string(m.distribution)},
                  {"sigma1", m.sigma1},
                  {"alpha", m.alpha},
                  {"sigma2", m.sigma2},
                  {"softargmax_temperature", m.softargmax_temperature},
                  {"variant", m.variant},
                  {"beta", m.beta},
                  {"input_height", m.input_height},
                  {"input_width", m.input_width}};
  doc["train"] = {{"learning_rate", t.learning_rate},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_eps", t.adam_eps},
                  {"plateau_factor", t.plateau_factor},
                  {"plateau_patience", t.plateau_patience},
                  {"plateau_threshold", t.plateau_threshold},
                  {"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"seed", t.seed},
                  {"augment", t.augment},
                  {"threads", t.threads},
                  {"augmentation", augment_json(t.augmentation)}};
  doc["synth"] = {{"n_images", c.n_images},     {"height", c.height},
                  {"width", c.width},           {"min_dots", c.min_dots},
                  {"max_dots", c.max_dots},     {"min_separation", c.min_separation},
                  {"border_margin", c.border_margin}, {"n_groups", c.n_groups},
                  {"seed", c.seed},             {"prefix", c.prefix}};
  json modes = json::array();
  for (Pooling p : cfg.eval.modes) modes.push_back(to_string(p));
  doc["eval"] = {{"radii", cfg.eval.radii},
                 {"modes", modes},
                 {"threshold", cfg.eval.threshold},
                 {"closeness", cfg.eval.closeness}};
  json grid = json::array();
  for (const auto& cell : cfg.xval.grid) {
    grid.push_back({{"sigma1", cell.sigma1},
                    {"sigma2", cell.sigma2},
                    {"distribution", to_string(cell.distribution)},
                    {"alpha", cell.alpha},
                    {"variant", cell.variant}});
  }
  doc["xval"] = {{"folds", cfg.xval.folds}, {"parallel_folds", cfg.xval.parallel_folds}, {"grid", grid}};
  return doc.dump(2) + "\n";
}

std::vector<double> parse_radii(std::string_view list) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, comma - start);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || end != item.data() + item.size()) {
      throw std::invalid_argument("invalid radius '" + std::string(item) + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::vector<Pooling> parse_modes(std::string_view list) {
  std::vector<Pooling> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    out.push_back(parse_pooling(list.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

}  // namespace ptdet
