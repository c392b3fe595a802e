#include "segrefine/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument(key + ": expected a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_int(key, trim(part)));
  if (out.empty()) throw std::invalid_argument(key + ": expected a comma-separated list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"model.width", [](RunConfig& c, auto& k, auto& v) { c.refiner.backbone_width = to_double(k, v); }},
      {"model.depths", [](RunConfig& c, auto& k, auto& v) { c.refiner.stage_depths = to_int_list(k, v); }},
      {"model.bins", [](RunConfig& c, auto& k, auto& v) { c.refiner.pyramid_bins = to_int_list(k, v); }},
      {"model.stem_channels", [](RunConfig& c, auto& k, auto& v) { c.refiner.stem_channels = to_int(k, v); }},
      {"model.psp_channels", [](RunConfig& c, auto& k, auto& v) { c.refiner.psp_channels = to_int(k, v); }},
      {"model.decoder4_channels", [](RunConfig& c, auto& k, auto& v) { c.refiner.decoder4_channels = to_int(k, v); }},
      {"model.decoder1_channels", [](RunConfig& c, auto& k, auto& v) { c.refiner.decoder1_channels = to_int(k, v); }},
      {"engine.L", [](RunConfig& c, auto& k, auto& v) { c.engine.L = to_int(k, v); }},
      {"engine.chip", [](RunConfig& c, auto& k, auto& v) { c.engine.chip = to_int(k, v); }},
      {"engine.switch_threshold", [](RunConfig& c, auto& k, auto& v) { c.engine.switch_threshold = to_int(k, v); }},
      {"engine.recursion_growth", [](RunConfig& c, auto& k, auto& v) { c.engine.recursion_growth = to_double(k, v); }},
      {"engine.recursion", [](RunConfig& c, auto& k, auto& v) { c.engine.recursion = to_bool(k, v); }},
      {"engine.binarize_threshold", [](RunConfig& c, auto& k, auto& v) { c.engine.binarize_threshold = static_cast<float>(to_double(k, v)); }},
      {"perturb.keep_min", [](RunConfig& c, auto& k, auto& v) { c.perturb.keep_min = to_double(k, v); }},
      {"perturb.keep_max", [](RunConfig& c, auto& k, auto& v) { c.perturb.keep_max = to_double(k, v); }},
      {"perturb.ops_min", [](RunConfig& c, auto& k, auto& v) { c.perturb.ops_min = to_int(k, v); }},
      {"perturb.ops_max", [](RunConfig& c, auto& k, auto& v) { c.perturb.ops_max = to_int(k, v); }},
      {"perturb.radius_min", [](RunConfig& c, auto& k, auto& v) { c.perturb.radius_min = to_double(k, v); }},
      {"perturb.radius_max", [](RunConfig& c, auto& k, auto& v) { c.perturb.radius_max = to_double(k, v); }},
      {"perturb.reference_size", [](RunConfig& c, auto& k, auto& v) { c.perturb.reference_size = to_int(k, v); }},
      {"train.optimizer", [](RunConfig& c, auto& k, auto& v) {
         if (v != "adam") throw std::invalid_argument(k + ": only 'adam' is supported");
         c.schedule.optimizer = v;
       }},
      {"train.weight_decay", [](RunConfig& c, auto& k, auto& v) { c.schedule.weight_decay = to_double(k, v); }},
      {"train.lr1", [](RunConfig& c, auto& k, auto& v) { c.schedule.lr_phase1 = to_double(k, v); }},
      {"train.iters1", [](RunConfig& c, auto& k, auto& v) { c.schedule.iters_phase1 = to_int(k, v); }},
      {"train.lr2", [](RunConfig& c, auto& k, auto& v) { c.schedule.lr_phase2 = to_double(k, v); }},
      {"train.iters2", [](RunConfig& c, auto& k, auto& v) { c.schedule.iters_phase2 = to_int(k, v); }},
      {"train.batch_size", [](RunConfig& c, auto& k, auto& v) { c.schedule.batch_size = to_int(k, v); }},
      {"train.beta1", [](RunConfig& c, auto& k, auto& v) { c.schedule.beta1 = to_double(k, v); }},
      {"train.beta2", [](RunConfig& c, auto& k, auto& v) { c.schedule.beta2 = to_double(k, v); }},
      {"train.eps", [](RunConfig& c, auto& k, auto& v) { c.schedule.eps = to_double(k, v); }},
      {"train.crop_size", [](RunConfig& c, auto& k, auto& v) { c.schedule.crop_size = to_int(k, v); }},
      {"train.checkpoint_every", [](RunConfig& c, auto& k, auto& v) { c.schedule.checkpoint_every = to_int(k, v); }},
      {"train.log_every", [](RunConfig& c, auto& k, auto& v) { c.schedule.log_every = to_int(k, v); }},
      {"train.alpha", [](RunConfig& c, auto& k, auto& v) { c.loss.alpha = to_double(k, v); }},
      {"train.dataset", [](RunConfig& c, auto&, auto& v) { c.dataset = v; }},
      {"train.synthetic_size", [](RunConfig& c, auto& k, auto& v) { c.synthetic_size = to_int(k, v); }},
      {"train.out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"train.resume", [](RunConfig& c, auto&, auto& v) { c.resume = v; }},
      {"scene.min_area", [](RunConfig& c, auto& k, auto& v) { c.scene.min_area = to_int(k, v); }},
      {"scene.roi_padding", [](RunConfig& c, auto& k, auto& v) { c.scene.roi_padding = to_double(k, v); }},
      {"scene.stuff_attenuation", [](RunConfig& c, auto& k, auto& v) { c.scene.stuff_attenuation = to_double(k, v); }},
      {"scene.fuse_threshold", [](RunConfig& c, auto& k, auto& v) { c.scene.fuse_threshold = static_cast<float>(to_double(k, v)); }},
  };
  return table;
}

}  // namespace

void TrainSchedule::validate() const {
  if (iters_phase1 < 1 || iters_phase2 < 1) throw std::invalid_argument("iteration counts must be >= 1");
  if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  if (crop_size < 8) throw std::invalid_argument("crop size must be >= 8");
  if (checkpoint_every < 1 || log_every < 1) throw std::invalid_argument("cadences must be >= 1");
}

Settings parse_settings(const std::string& text) {
  Settings out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

Settings read_settings_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_settings(ss.str());
}

void apply_settings(RunConfig& config, const Settings& settings) {
  if (const auto it = settings.find("model.preset"); it != settings.end()) {
    if (it->second == "toy") {
      config.refiner = RefinerConfig::toy();
    } else if (it->second == "full") {
      config.refiner = RefinerConfig{};
    } else {
      throw std::invalid_argument("model.preset: expected 'toy' or 'full', got '" + it->second + "'");
    }
    config.model_preset = it->second;
  }
  const auto& table = setters();
  for (const auto& [key, value] : settings) {
    if (key == "model.preset") continue;
    const auto it = table.find(key);
    if (it == table.end()) throw std::invalid_argument("unknown config key: " + key);
    it->second(config, key, value);
  }
}

std::string dump_config(const RunConfig& c) {
  const std::map<std::string, std::string> kv{
      {"seed", std::to_string(c.seed)},
      {"model.preset", c.model_preset},
      {"model.width", num(c.refiner.backbone_width)},
      {"model.depths", join(c.refiner.stage_depths)},
      {"model.bins", join(c.refiner.pyramid_bins)},
      {"model.stem_channels", std::to_string(c.refiner.stem_channels)},
      {"model.psp_channels", std::to_string(c.refiner.psp_channels)},
      {"model.decoder4_channels", std::to_string(c.refiner.decoder4_channels)},
      {"model.decoder1_channels", std::to_string(c.refiner.decoder1_channels)},
      {"engine.L", std::to_string(c.engine.L)},
      {"engine.chip", std::to_string(c.engine.chip)},
      {"engine.switch_threshold", std::to_string(c.engine.switch_threshold)},
      {"engine.recursion_growth", num(c.engine.recursion_growth)},
      {"engine.recursion", c.engine.recursion ? "true" : "false"},
      {"engine.binarize_threshold", num(c.engine.binarize_threshold)},
      {"perturb.keep_min", num(c.perturb.keep_min)},
      {"perturb.keep_max", num(c.perturb.keep_max)},
      {"perturb.ops_min", std::to_string(c.perturb.ops_min)},
      {"perturb.ops_max", std::to_string(c.perturb.ops_max)},
      {"perturb.radius_min", num(c.perturb.radius_min)},
      {"perturb.radius_max", num(c.perturb.radius_max)},
      {"perturb.reference_size", std::to_string(c.perturb.reference_size)},
      {"train.optimizer", c.schedule.optimizer},
      {"train.weight_decay", num(c.schedule.weight_decay)},
      {"train.lr1", num(c.schedule.lr_phase1)},
      {"train.iters1", std::to_string(c.schedule.iters_phase1)},
      {"train.lr2", num(c.schedule.lr_phase2)},
      {"train.iters2", std::to_string(c.schedule.iters_phase2)},
      {"train.batch_size", std::to_string(c.schedule.batch_size)},
      {"train.beta1", num(c.schedule.beta1)},
      {"train.beta2", num(c.schedule.beta2)},
      {"train.eps", num(c.schedule.eps)},
      {"train.crop_size", std::to_string(c.schedule.crop_size)},
      {"train.checkpoint_every", std::to_string(c.schedule.checkpoint_every)},
      {"train.log_every", std::to_string(c.schedule.log_every)},
      {"train.alpha", num(c.loss.alpha)},
      {"train.dataset", c.dataset},
      {"train.synthetic_size", std::to_string(c.synthetic_size)},
      {"train.out_dir", c.out_dir.string()},
      {"train.resume", c.resume.string()},
      {"scene.min_area", std::to_string(c.scene.min_area)},
      {"scene.roi_padding", num(c.scene.roi_padding)},
      {"scene.stuff_attenuation", num(c.scene.stuff_attenuation)},
      {"scene.fuse_threshold", num(c.scene.fuse_threshold)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

RunConfig resolve_config(const std::filesystem::path& config_file, const Settings& overrides) {
  RunConfig config;
  Settings merged;
  if (!config_file.empty()) merged = read_settings_file(config_file);
  for (const auto& [k, v] : overrides) merged[k] = v;
  apply_settings(config, merged);
  config.scene.engine = config.engine;
  return config;
}

}  // namespace segrefine
