#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "segrefine/network.hpp"
#include "segrefine/raster.hpp"

namespace segrefine {

struct EngineConfig {
  int L = 900;                    // working long-axis length and crop size
  int chip = 16;                  // output border trimmed from each crop side
  int switch_threshold = 900;     // Local step runs when max(W, H) >= this
  double recursion_growth = 4.0;  // max per-stage scale factor of the ladder
  bool recursion = false;
  float binarize_threshold = 0.5f;

  int tile_stride() const { return L / 2 - 2 * chip; }
  /// Throws std::invalid_argument when L < 64, chip < 0, the tile stride is not
  /// positive, or the stride would leave gaps between chipped regions.
  void validate() const;
};

struct TileCrop {
  BoxRegion crop;          // L x L input window
  BoxRegion contribution;  // image-space region this crop writes during fusion
};

struct TilePlan {
  int width = 0;
  int height = 0;
  std::vector<TileCrop> crops;  // row-major accumulation order
};

/// Crop start offsets along one axis: multiples of the tile stride, with the
/// crop that would cross the far edge shifted back to end exactly on it.
std::vector<int> tile_starts(int extent, const EngineConfig& config);

/// Throws std::invalid_argument when either side is shorter than L.
TilePlan plan_tiles(int width, int height, const EngineConfig& config);

/// Running per-pixel sum and count for averaging overlapping crop outputs.
class FusionAccumulator {
 public:
  FusionAccumulator(int height, int width);

  /// `crop_output` covers tile.crop; only tile.contribution is accumulated.
  void add(const ProbMask& crop_output, const TileCrop& tile);
  int count(int row, int col) const { return counts_[index(row, col)]; }
  /// Throws std::logic_error if any pixel was never covered.
  ProbMask finalize() const;

 private:
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width_ + col; }

  int height_;
  int width_;
  std::vector<double> sums_;
  std::vector<int> counts_;
};

/// Instrumentation points used by tests and the CLI log.
struct EngineHooks {
  std::function<void(std::string_view path)> on_dispatch;  // "global-only" or "global+local"
  std::function<void(const TilePlan&)> on_plan;
  std::function<void(int stage, int long_axis)> on_local_stage;
};

struct GlobalOutputs {
  ProbMask s11;
  ProbMask s14;
};

struct LocalOutputs {
  ProbMask fine;    // fused stride-1 output
  ProbMask coarse;  // fused stride-4 companion (seeds the next ladder stage)
};

/// 3-level cascade at long axis L, outputs resized back to the input extent.
GlobalOutputs global_step(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                          const EngineConfig& config);

/// Tiled 2-level cascade at the image's own resolution with averaged fusion.
/// Images with a side shorter than L are reflect-padded to L and cropped back.
LocalOutputs local_step_outputs(RefinerModel& model, const Raster2D& image, const ProbMask& s11,
                                const ProbMask& s14, const EngineConfig& config,
                                const EngineHooks& hooks = {});

ProbMask local_step(RefinerModel& model, const Raster2D& image, const ProbMask& s11,
                    const ProbMask& s14, const EngineConfig& config, const EngineHooks& hooks = {});

/// Long-axis sizes at which Local passes run for an image whose long axis is
/// `long_axis`; empty when only the Global step applies.
std::vector<int> local_ladder(int long_axis, const EngineConfig& config);

/// Global step, then Local passes along local_ladder(). Returns raw
/// probabilities at the input extent.
ProbMask refine(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                const EngineConfig& config, const EngineHooks& hooks = {});

}  // namespace segrefine
