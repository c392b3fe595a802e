#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segrefine/engine.hpp"
#include "segrefine/losses.hpp"
#include "segrefine/network.hpp"
#include "segrefine/perturb.hpp"
#include "segrefine/scene.hpp"

namespace segrefine {

/// Optimisation schedule; defaults are the full-scale training recipe.
struct TrainSchedule {
  std::string optimizer = "adam";
  double weight_decay = 1e-4;
  double lr_phase1 = 3e-4;
  int iters_phase1 = 30000;
  double lr_phase2 = 3e-5;
  int iters_phase2 = 30000;
  int batch_size = 9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int crop_size = 224;
  int checkpoint_every = 1000;
  int log_every = 10;

  int total_iterations() const { return iters_phase1 + iters_phase2; }
  double learning_rate(int iteration) const {
    return iteration < iters_phase1 ? lr_phase1 : lr_phase2;
  }
  void validate() const;
};

struct RunConfig {
  std::string model_preset = "full";  // "full" (ResNet-50 width) or "toy"
  RefinerConfig refiner;
  EngineConfig engine;
  PerturbParams perturb;
  TrainSchedule schedule;
  SceneConfig scene;
  LossWeights loss;
  std::uint64_t seed = 0;

  std::string dataset = "synthetic:20";  // "synthetic:<n>" or a directory path
  int synthetic_size = 224;
  std::filesystem::path out_dir = "runs/default";
  std::filesystem::path resume;  // optional checkpoint to continue from
};

/// Flat `key = value` settings; '#' starts a comment.
using Settings = std::map<std::string, std::string>;

Settings parse_settings(const std::string& text);
Settings read_settings_file(const std::filesystem::path& path);

/// Applies settings onto a config. `model.preset` is applied before any other
/// `model.*` key so explicit channel counts override the preset. Unknown keys
/// or malformed values throw std::invalid_argument naming the key.
void apply_settings(RunConfig& config, const Settings& settings);

/// Every effective setting as sorted `key=value` lines.
std::string dump_config(const RunConfig& config);

/// Documented defaults overlaid with a file, then with explicit overrides.
RunConfig resolve_config(const std::filesystem::path& config_file, const Settings& overrides);

}  // namespace segrefine
