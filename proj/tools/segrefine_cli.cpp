// segrefine: command-line front end for refinement, training, evaluation,
// scene parsing and mask perturbation.

#include <torch/torch.h>

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "segrefine/commands.hpp"
#include "segrefine/config.hpp"

namespace {

struct Common {
  std::string config_file;
  std::string model;
  std::optional<int> L;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool recursion = false;
  std::optional<double> stuff_attenuation;
  std::optional<int> min_area;
  bool dump_config = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "flat key=value config file");
  app->add_option("--model", c.model, "checkpoint file");
  app->add_option("--L", c.L, "working long-axis length");
  app->add_option("--seed", c.seed, "root random seed");
  app->add_option("--out", c.out, "output directory (train, eval)");
  app->add_flag("--recursion", c.recursion, "enable the coarse-to-fine Local ladder");
  app->add_option("--stuff-attenuation", c.stuff_attenuation, "multiplier on stuff-class confidences");
  app->add_option("--min-area", c.min_area, "minimum component area for scene ROIs");
  app->add_flag("--dump-config", c.dump_config, "print the effective config and exit");
  app->add_option("--set", c.sets, "extra key=value overrides");
}

segrefine::RunConfig resolve(const Common& c, bool out_is_train_dir) {
  segrefine::Settings overrides;
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (c.L) overrides["engine.L"] = std::to_string(*c.L);
  if (c.seed) overrides["seed"] = std::to_string(*c.seed);
  if (c.recursion) overrides["engine.recursion"] = "true";
  if (c.stuff_attenuation) overrides["scene.stuff_attenuation"] = std::to_string(*c.stuff_attenuation);
  if (c.min_area) overrides["scene.min_area"] = std::to_string(*c.min_area);
  if (out_is_train_dir && !c.out.empty()) overrides["train.out_dir"] = c.out;
  return segrefine::resolve_config(c.config_file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"segrefine: class-agnostic segmentation refinement"};
  app.require_subcommand(1);

  Common common;
  segrefine::RefineArgs refine_args;
  segrefine::EvalArgs eval_args;
  segrefine::ParseArgs parse_args;
  segrefine::PerturbArgs perturb_args;
  std::string image, mask, out_path, labels, manifest, pred_dir, gt_dir, resume;

  auto* refine = app.add_subcommand("refine", "refine one image's mask");
  refine->add_option("image", image)->required();
  refine->add_option("mask", mask)->required();
  refine->add_option("output", out_path)->required();
  refine->add_option("--confidence", refine_args.confidence_out, "also write raw probabilities");
  refine->add_option("--overlay", refine_args.overlay_out, "also write an overlay image");
  add_common(refine, common);

  auto* train = app.add_subcommand("train", "train a refinement model");
  train->add_option("--resume", resume, "checkpoint to continue from");
  add_common(train, common);

  auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
  eval->add_option("pred_dir", pred_dir)->required();
  eval->add_option("gt_dir", gt_dir)->required();
  add_common(eval, common);

  auto* parse = app.add_subcommand("parse", "refine a multi-class label map");
  parse->add_option("image", image)->required();
  parse->add_option("labels", labels)->required();
  parse->add_option("manifest", manifest)->required();
  parse->add_option("output", out_path)->required();
  add_common(parse, common);

  auto* perturb = app.add_subcommand("perturb", "write perturbed copies of ground-truth masks");
  perturb->add_option("gt_dir", gt_dir)->required();
  perturb->add_option("out_dir", out_path)->required();
  add_common(perturb, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  segrefine::RunConfig config;
  try {
    config = resolve(common, train->parsed());
    if (train->parsed() && !resume.empty()) config.resume = resume;
  } catch (const std::exception& e) {
    segrefine::log_event(std::cerr, "error", {{"reason", "config"}, {"detail", e.what()}});
    return segrefine::kExitFailure;
  }
  if (common.dump_config) {
    std::cout << segrefine::dump_config(config);
    return segrefine::kExitOk;
  }

  if (refine->parsed()) {
    refine_args.image = image;
    refine_args.mask = mask;
    refine_args.out = out_path;
    refine_args.model = common.model;
    return segrefine::cmd_refine(refine_args, config, std::cout);
  }
  if (train->parsed()) return segrefine::cmd_train(config, std::cout);
  if (eval->parsed()) {
    eval_args.pred_dir = pred_dir;
    eval_args.gt_dir = gt_dir;
    eval_args.out_dir = common.out;
    return segrefine::cmd_eval(eval_args, std::cout);
  }
  if (parse->parsed()) {
    parse_args.image = image;
    parse_args.labels = labels;
    parse_args.manifest = manifest;
    parse_args.out = out_path;
    parse_args.model = common.model;
    return segrefine::cmd_parse(parse_args, config, std::cout);
  }
  perturb_args.gt_dir = gt_dir;
  perturb_args.out_dir = out_path;
  return segrefine::cmd_perturb(perturb_args, config, std::cout);
}
