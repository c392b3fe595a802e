#include "segrefine/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "segrefine/checkpoint.hpp"
#include "segrefine/engine.hpp"
#include "segrefine/errors.hpp"
#include "segrefine/image_io.hpp"
#include "segrefine/metrics.hpp"
#include "segrefine/perturb.hpp"
#include "segrefine/scene.hpp"
#include "segrefine/train.hpp"

namespace segrefine {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

bool require_file(const fs::path& path, const std::string& what, std::ostream& log) {
  if (path.empty() || !fs::is_regular_file(path)) {
    log_event(log, "error", {{"reason", "missing_" + what}, {"path", path.string()}});
    return false;
  }
  return true;
}

bool require_dir(const fs::path& path, const std::string& what, std::ostream& log) {
  if (path.empty() || !fs::is_directory(path)) {
    log_event(log, "error", {{"reason", "missing_" + what}, {"path", path.string()}});
    return false;
  }
  return true;
}

/// Maps exceptions onto exit codes; invalid arguments count as shape failures.
int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NonFiniteLossError& e) {
    log_event(log, "error", {{"reason", "non_finite_loss"}, {"iteration", std::to_string(e.iteration())}});
    return kExitFailure;
  } catch (const DataFormatError& e) {
    log_event(log, "error", {{"reason", "data_format"}, {"item", e.item()}, {"detail", e.what()}});
    return kExitIo;
  } catch (const IoError& e) {
    log_event(log, "error", {{"reason", "io"}, {"detail", e.what()}});
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    log_event(log, "error", {{"reason", "io"}, {"detail", e.what()}});
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    log_event(log, "error", {{"reason", "shape"}, {"detail", e.what()}});
    return kExitShape;
  } catch (const std::exception& e) {
    log_event(log, "error", {{"reason", "failure"}, {"detail", e.what()}});
    return kExitFailure;
  }
}

std::map<std::string, fs::path> png_stems(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

}  // namespace

void log_event(std::ostream& os, const std::string& event,
               std::initializer_list<std::pair<std::string, std::string>> fields) {
  os << "event=" << event;
  for (const auto& [k, v] : fields) {
    os << ' ' << k << '=';
    if (v.find_first_of(" \t=") == std::string::npos && !v.empty()) {
      os << v;
    } else {
      os << std::quoted(v);
    }
  }
  os << '\n';
}

int cmd_refine(const RefineArgs& args, const RunConfig& config, std::ostream& log) {
  if (!require_file(args.image, "image", log) || !require_file(args.mask, "mask", log) ||
      !require_file(args.model, "model", log)) {
    return kExitIo;
  }
  return guarded(log, [&] {
    config.engine.validate();
    const auto image = read_image(args.image);
    auto mask = read_soft_mask(args.mask);
    if (!mask.same_extent(image)) {
      log_event(log, "warning", {{"reason", "mask_resized"},
                                 {"from", std::to_string(mask.width()) + "x" + std::to_string(mask.height())},
                                 {"to", std::to_string(image.width()) + "x" + std::to_string(image.height())}});
      mask = bilinear_resize(mask, image.height(), image.width());
    }
    auto loaded = load_checkpoint(args.model);
    loaded.model.eval();
    log_event(log, "refine_start", {{"image", args.image.string()},
                                    {"width", std::to_string(image.width())},
                                    {"height", std::to_string(image.height())},
                                    {"L", std::to_string(config.engine.L)},
                                    {"recursion", config.engine.recursion ? "true" : "false"}});
    EngineHooks hooks;
    hooks.on_dispatch = [&](std::string_view path) { log_event(log, "dispatch", {{"path", std::string(path)}}); };
    hooks.on_plan = [&](const TilePlan& plan) {
      log_event(log, "tiles", {{"width", std::to_string(plan.width)},
                               {"height", std::to_string(plan.height)},
                               {"crops", std::to_string(plan.crops.size())}});
    };
    hooks.on_local_stage = [&](int stage, int long_axis) {
      log_event(log, "local_stage", {{"stage", std::to_string(stage)}, {"long_axis", std::to_string(long_axis)}});
    };
    const auto prob = refine(loaded.model, image, mask, config.engine, hooks);
    write_mask(args.out, prob, config.engine.binarize_threshold);
    if (!args.confidence_out.empty()) write_confidence(args.confidence_out, prob);
    if (!args.overlay_out.empty()) write_overlay(args.overlay_out, image, prob, config.engine.binarize_threshold);
    log_event(log, "done", {{"out", args.out.string()}});
    return static_cast<int>(kExitOk);
  });
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  if (!config.resume.empty() && !require_file(config.resume, "checkpoint", log)) return kExitIo;
  return guarded(log, [&] {
    log_event(log, "train_start", {{"dataset", config.dataset},
                                   {"iterations", std::to_string(config.schedule.total_iterations())},
                                   {"batch", std::to_string(config.schedule.batch_size)},
                                   {"seed", std::to_string(config.seed)},
                                   {"out", config.out_dir.string()}});
    TrainOptions options;
    options.on_iteration = [&](const TrainEvent& e) {
      if (e.iteration % config.schedule.log_every == 0) {
        log_event(log, "iter", {{"iter", std::to_string(e.iteration)}, {"loss", fmt(e.loss)}, {"lr", fmt(e.lr)}});
      }
    };
    const auto result = train_loop(config, options);
    log_event(log, "done", {{"iterations", std::to_string(result.completed)},
                            {"checkpoint", result.final_checkpoint.string()}});
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& log) {
  if (!require_dir(args.pred_dir, "pred_dir", log) || !require_dir(args.gt_dir, "gt_dir", log)) return kExitIo;
  return guarded(log, [&] {
    const auto pred = png_stems(args.pred_dir);
    const auto gt = png_stems(args.gt_dir);
    bool unmatched = false;
    for (const auto& [stem, _] : pred) {
      if (!gt.contains(stem)) {
        log_event(log, "unmatched", {{"stem", stem}, {"missing_in", "gt"}});
        unmatched = true;
      }
    }
    for (const auto& [stem, _] : gt) {
      if (!pred.contains(stem)) {
        log_event(log, "unmatched", {{"stem", stem}, {"missing_in", "pred"}});
        unmatched = true;
      }
    }
    if (unmatched) return static_cast<int>(kExitUnmatched);

    EvalReport report;
    for (const auto& [stem, gt_path] : gt) {
      const auto g = read_mask(gt_path);
      const auto p = binarize(read_soft_mask(pred.at(stem)));
      if (!p.same_extent(g)) {
        throw std::invalid_argument(stem + ": prediction and ground truth extents differ");
      }
      ImageScore score{stem, iou(p, g), 0.0};
      try {
        score.mba = mba(p, g);
      } catch (const UndefinedMetricError&) {
        score.mba = std::nan("");
        log_event(log, "warning", {{"reason", "mba_undefined"}, {"stem", stem}});
      }
      report.images.push_back(score);
    }
    report.write_table(log);
    if (!args.out_dir.empty()) {
      fs::create_directories(args.out_dir);
      std::ofstream table(args.out_dir / "report.txt");
      std::ofstream kv(args.out_dir / "report.kv");
      if (!table || !kv) throw IoError("cannot write report in " + args.out_dir.string());
      report.write_table(table);
      report.write_key_values(kv);
    }
    log_event(log, "done", {{"count", std::to_string(report.images.size())},
                            {"mean_iou", fmt(report.mean_iou())},
                            {"mean_mba", fmt(report.mean_mba())}});
    return static_cast<int>(kExitOk);
  });
}

int cmd_parse(const ParseArgs& args, const RunConfig& config, std::ostream& log) {
  if (!require_file(args.image, "image", log) || !require_file(args.labels, "labels", log) ||
      !require_file(args.manifest, "manifest", log) || !require_file(args.model, "model", log)) {
    return kExitIo;
  }
  return guarded(log, [&] {
    const auto classes = read_class_manifest(args.manifest);
    std::map<int, ClassEntry> by_index;
    for (const auto& c : classes) by_index[c.index] = c;
    const auto image = read_image(args.image);
    const auto raw = read_label_image(args.labels);
    if (raw.height != image.height() || raw.width != image.width()) {
      throw std::invalid_argument("label map and image extents differ");
    }
    for (const auto l : raw.labels) {
      if (!by_index.contains(l)) {
        log_event(log, "error", {{"reason", "unknown_label"}, {"index", std::to_string(l)}});
        return static_cast<int>(kExitUnknownLabel);
      }
    }
    LabelMap labels(raw.height, raw.width, by_index.rbegin()->first + 1);
    labels.labels = raw.labels;
    for (const auto& [idx, c] : by_index) {
      if (c.stuff) labels.stuff.insert(idx);
    }
    auto loaded = load_checkpoint(args.model);
    loaded.model.eval();
    SceneConfig scene = config.scene;
    scene.engine = config.engine;
    const auto tasks = extract_object_rois(labels, scene);
    log_event(log, "parse_start", {{"classes", std::to_string(by_index.size())},
                                   {"rois", std::to_string(tasks.size())}});
    const auto conf = refine_rois(loaded.model, image, tasks, labels.stuff, scene);
    const auto fused = fuse(conf, labels, scene.fuse_threshold);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < fused.labels.size(); ++i) changed += fused.labels[i] != labels.labels[i];
    write_label_image(args.out, LabelImage{fused.height, fused.width, fused.labels});
    log_event(log, "done", {{"out", args.out.string()}, {"changed_pixels", std::to_string(changed)}});
    return static_cast<int>(kExitOk);
  });
}

int cmd_perturb(const PerturbArgs& args, const RunConfig& config, std::ostream& log) {
  if (!require_dir(args.gt_dir, "gt_dir", log)) return kExitIo;
  return guarded(log, [&] {
    config.perturb.validate();
    const auto masks = png_stems(args.gt_dir);
    fs::create_directories(args.out_dir);
    std::ostringstream manifest;
    manifest << std::setprecision(17);
    manifest << "seed=" << config.seed << '\n';
    manifest << "keep_min=" << config.perturb.keep_min << '\n';
    manifest << "keep_max=" << config.perturb.keep_max << '\n';
    manifest << "ops_min=" << config.perturb.ops_min << '\n';
    manifest << "ops_max=" << config.perturb.ops_max << '\n';
    manifest << "radius_min=" << config.perturb.radius_min << '\n';
    manifest << "radius_max=" << config.perturb.radius_max << '\n';
    manifest << "reference_size=" << config.perturb.reference_size << '\n';
    double iou_sum = 0.0;
    std::size_t counted = 0;
    std::uint64_t stream = 0;
    for (const auto& [stem, path] : masks) {
      const auto gt = read_mask(path);
      auto rng = split_rng(config.seed, stream);
      const auto out = perturb_mask(gt, config.perturb, rng);
      write_mask(args.out_dir / (stem + ".png"), out);
      const bool empty = std::none_of(gt.values().begin(), gt.values().end(), [](float v) { return v > 0.0f; });
      if (empty) log_event(log, "warning", {{"reason", "empty_mask"}, {"stem", stem}});
      const double score = iou(out, gt);
      manifest << "file." << stem << ".stream=" << stream << '\n';
      manifest << "file." << stem << ".iou=" << score << '\n';
      if (!empty) {
        iou_sum += score;
        ++counted;
      }
      ++stream;
    }
    const double mean = counted == 0 ? 0.0 : iou_sum / static_cast<double>(counted);
    manifest << "count=" << masks.size() << '\n';
    manifest << "mean.iou=" << mean << '\n';
    std::ofstream os(args.out_dir / "perturb_manifest.txt");
    if (!os) throw IoError("cannot write perturb manifest in " + args.out_dir.string());
    os << manifest.str();
    log_event(log, "done", {{"count", std::to_string(masks.size())}, {"mean_iou", fmt(mean)}});
    return static_cast<int>(kExitOk);
  });
}

}  // namespace segrefine
