#pragma once

#include <torch/torch.h>

#include <vector>

#include "segrefine/network.hpp"
#include "segrefine/raster.hpp"

namespace segrefine {

struct LossWeights {
  double alpha = 5.0;  // gradient-loss weight
};

/// Loss terms of one cascade level, keyed by head stride.
struct LevelLoss {
  double ce8 = 0.0;
  double ce4 = 0.0;
  double l1l2_4 = 0.0;
  double l1l2_1 = 0.0;
  double grad1 = 0.0;
  double total = 0.0;
};

struct LossBreakdown {
  std::vector<LevelLoss> levels;
  double total = 0.0;
};

/// CE(8) + (L1L2(4) + CE(4)) / 2 + L1L2(1) + grad(1); `grad1` already carries alpha.
double combine_level(double ce8, double ce4, double l1l2_4, double l1l2_1, double grad1);

inline constexpr double kProbClamp = 1e-7;

// Tensor versions operate on (N, 1, H, W) tensors of any floating dtype and are
// differentiable with respect to `pred`.
namespace tensor {

torch::Tensor ce_loss(const torch::Tensor& pred, const torch::Tensor& gt);
torch::Tensor l1l2_loss(const torch::Tensor& pred, const torch::Tensor& gt);
torch::Tensor mean3_filter(const torch::Tensor& x);
torch::Tensor sobel_gradient_magnitude(const torch::Tensor& x);
torch::Tensor gradient_loss(const torch::Tensor& pred, const torch::Tensor& gt, double alpha);

/// Area-average over stride x stride blocks (partial edge blocks average what
/// they cover), then threshold at 0.5.
torch::Tensor downscale_target(const torch::Tensor& gt, int stride);

struct TotalLoss {
  torch::Tensor total;
  LossBreakdown breakdown;
};

/// Applies the per-level combination to every level and sums. `gt` is at the
/// working resolution. Throws std::invalid_argument on an empty level list.
TotalLoss total_loss(const std::vector<StrideTensors>& levels, const torch::Tensor& gt,
                     const LossWeights& weights);

}  // namespace tensor

// Raster versions, evaluated in double precision.
double ce_loss(const ProbMask& pred, const BinaryMask& gt);
double l1l2_loss(const ProbMask& pred, const BinaryMask& gt);
ProbMask mean3_filter(const ProbMask& x);
Raster2D sobel_gradient_magnitude(const ProbMask& x);
double gradient_loss(const ProbMask& pred, const BinaryMask& gt, double alpha);
LossBreakdown total_loss(const std::vector<StrideOutputs>& levels, const BinaryMask& gt,
                         const LossWeights& weights);

}  // namespace segrefine
