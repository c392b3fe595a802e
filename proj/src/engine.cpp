#include "segrefine/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace segrefine {

void EngineConfig::validate() const {
  if (L < 64) throw std::invalid_argument("L must be >= 64");
  if (chip < 0) throw std::invalid_argument("chip must be >= 0");
  if (tile_stride() <= 0) throw std::invalid_argument("tile stride L/2 - 2*chip must be positive");
  if (tile_stride() > L - 2 * chip) {
    throw std::invalid_argument("tile stride exceeds the chipped crop; fusion would leave gaps");
  }
  if (!(recursion_growth > 1.0)) throw std::invalid_argument("recursion_growth must exceed 1");
  if (switch_threshold < 1) throw std::invalid_argument("switch_threshold must be >= 1");
}

std::vector<int> tile_starts(int extent, const EngineConfig& config) {
  if (extent < config.L) {
    throw std::invalid_argument("extent " + std::to_string(extent) + " is smaller than L=" +
                                std::to_string(config.L));
  }
  const int stride = config.tile_stride();
  std::vector<int> starts;
  for (int start = 0;; start += stride) {
    if (start + config.L >= extent) {
      const int last = extent - config.L;
      if (starts.empty() || starts.back() != last) starts.push_back(last);
      break;
    }
    starts.push_back(start);
  }
  return starts;
}

TilePlan plan_tiles(int width, int height, const EngineConfig& config) {
  config.validate();
  if (width < config.L || height < config.L) {
    throw std::invalid_argument("plan_tiles: image " + std::to_string(width) + "x" +
                                std::to_string(height) + " smaller than L=" +
                                std::to_string(config.L));
  }
  const auto ys = tile_starts(height, config);
  const auto xs = tile_starts(width, config);
  const int L = config.L;
  const int chip = config.chip;

  // chip every side except those lying on the image border
  auto span = [&](int start, int extent) {
    const int lo = start == 0 ? 0 : start + chip;
    const int hi = start + L == extent ? extent : start + L - chip;
    return std::pair{lo, hi};
  };

  TilePlan plan{width, height, {}};
  plan.crops.reserve(ys.size() * xs.size());
  for (const int y : ys) {
    const auto [y0, y1] = span(y, height);
    for (const int x : xs) {
      const auto [x0, x1] = span(x, width);
      plan.crops.push_back({BoxRegion{y, x, L, L}, BoxRegion{y0, x0, y1 - y0, x1 - x0}});
    }
  }
  return plan;
}

FusionAccumulator::FusionAccumulator(int height, int width)
    : height_(height),
      width_(width),
      sums_(static_cast<std::size_t>(height) * width, 0.0),
      counts_(static_cast<std::size_t>(height) * width, 0) {
  if (height < 1 || width < 1) throw std::invalid_argument("accumulator extent must be >= 1");
}

void FusionAccumulator::add(const ProbMask& crop_output, const TileCrop& tile) {
  if (crop_output.height() != tile.crop.height || crop_output.width() != tile.crop.width ||
      crop_output.channels() != 1) {
    throw std::invalid_argument("crop output does not match its tile");
  }
  const auto& c = tile.contribution;
  if (!c.fits_inside(height_, width_)) throw std::invalid_argument("contribution outside image");
  for (int r = c.top; r < c.bottom(); ++r) {
    for (int col = c.left; col < c.right(); ++col) {
      sums_[index(r, col)] += crop_output.at(r - tile.crop.top, col - tile.crop.left);
      ++counts_[index(r, col)];
    }
  }
}

ProbMask FusionAccumulator::finalize() const {
  ProbMask out(height_, width_, 1);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (counts_[i] == 0) throw std::logic_error("fusion left an uncovered pixel");
    v[i] = static_cast<float>(sums_[i] / counts_[i]);
  }
  return out;
}

GlobalOutputs global_step(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                          const EngineConfig& config) {
  if (!image.same_extent(init)) throw std::invalid_argument("global_step: mask/image extent mismatch");
  const auto [small_image, scale] = downsample_to_long_axis(image, config.L);
  const auto small_init = scale == 1.0 ? init : bilinear_resize(init, small_image.height(), small_image.width());
  const auto out = cascade_final(model, small_image, small_init, small_init, {8, 4, 1});
  return {bilinear_resize(out.s11, image.height(), image.width()),
          bilinear_resize(out.s14, image.height(), image.width())};
}

LocalOutputs local_step_outputs(RefinerModel& model, const Raster2D& image, const ProbMask& s11,
                                const ProbMask& s14, const EngineConfig& config,
                                const EngineHooks& hooks) {
  if (!image.same_extent(s11) || !image.same_extent(s14)) {
    throw std::invalid_argument("local_step: mask/image extent mismatch");
  }
  config.validate();
  const int h = image.height();
  const int w = image.width();
  const int pad_b = std::max(0, config.L - h);
  const int pad_r = std::max(0, config.L - w);
  const Raster2D img = pad_reflect(image, pad_b, pad_r);
  const ProbMask fine_seed = pad_reflect(s11, pad_b, pad_r);
  const ProbMask coarse_seed = pad_reflect(s14, pad_b, pad_r);

  const TilePlan plan = plan_tiles(img.width(), img.height(), config);
  if (hooks.on_plan) hooks.on_plan(plan);

  FusionAccumulator fine(img.height(), img.width());
  FusionAccumulator coarse(img.height(), img.width());
  for (const auto& tile : plan.crops) {
    const auto out = cascade_final(model, extract_crop(img, tile.crop),
                                   extract_crop(fine_seed, tile.crop),
                                   extract_crop(coarse_seed, tile.crop), {4, 1});
    fine.add(out.s11, tile);
    coarse.add(out.s14, tile);
  }
  LocalOutputs result{fine.finalize(), coarse.finalize()};
  if (pad_b > 0 || pad_r > 0) {
    const BoxRegion keep{0, 0, h, w};
    result.fine = extract_crop(result.fine, keep);
    result.coarse = extract_crop(result.coarse, keep);
  }
  return result;
}

ProbMask local_step(RefinerModel& model, const Raster2D& image, const ProbMask& s11,
                    const ProbMask& s14, const EngineConfig& config, const EngineHooks& hooks) {
  return local_step_outputs(model, image, s11, s14, config, hooks).fine;
}

std::vector<int> local_ladder(int long_axis, const EngineConfig& config) {
  if (long_axis < config.switch_threshold) return {};
  const double ratio = static_cast<double>(long_axis) / config.L;
  if (!config.recursion || ratio <= config.recursion_growth) return {long_axis};
  std::vector<int> ladder;
  double size = config.L;
  while (ladder.empty() || ladder.back() < long_axis) {
    size *= config.recursion_growth;
    ladder.push_back(std::min(long_axis, static_cast<int>(std::lround(size))));
  }
  return ladder;
}

ProbMask refine(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                const EngineConfig& config, const EngineHooks& hooks) {
  if (!image.same_extent(init) || init.channels() != 1) {
    throw std::invalid_argument("refine: initial mask must be single-channel at the image extent");
  }
  config.validate();
  const int long_axis = std::max(image.height(), image.width());
  const auto ladder = local_ladder(long_axis, config);
  if (hooks.on_dispatch) hooks.on_dispatch(ladder.empty() ? "global-only" : "global+local");

  auto global = global_step(model, image, init, config);
  if (ladder.empty()) return std::move(global.s11);

  ProbMask fine = std::move(global.s11);
  ProbMask coarse = std::move(global.s14);
  for (std::size_t stage = 0; stage < ladder.size(); ++stage) {
    if (hooks.on_local_stage) hooks.on_local_stage(static_cast<int>(stage), ladder[stage]);
    const auto stage_image = downsample_to_long_axis(image, ladder[stage]).first;
    const int sh = stage_image.height();
    const int sw = stage_image.width();
    auto out = local_step_outputs(model, stage_image, bilinear_resize(fine, sh, sw),
                                  bilinear_resize(coarse, sh, sw), config, hooks);
    fine = std::move(out.fine);
    coarse = std::move(out.coarse);
  }
  return bilinear_resize(fine, image.height(), image.width());
}

}  // namespace segrefine
