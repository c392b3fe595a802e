#include "segrefine/losses.hpp"

#include <stdexcept>

namespace segrefine {

namespace F = torch::nn::functional;

double combine_level(double ce8, double ce4, double l1l2_4, double l1l2_1, double grad1) {
  return ce8 + 0.5 * (l1l2_4 + ce4) + l1l2_1 + grad1;
}

namespace tensor {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(std::string(what) + ": prediction and target shapes differ");
  }
}

torch::Tensor replicate_pad1(const torch::Tensor& x) {
  return F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
}

}  // namespace

torch::Tensor ce_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  require_same_shape(pred, gt, "ce_loss");
  auto p = pred.clamp(kProbClamp, 1.0 - kProbClamp);
  auto y = gt.to(pred.dtype());
  return -(y * torch::log(p) + (1.0 - y) * torch::log(1.0 - p)).mean();
}

torch::Tensor l1l2_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  require_same_shape(pred, gt, "l1l2_loss");
  auto d = pred - gt.to(pred.dtype());
  return d.abs().mean() + d.square().mean();
}

torch::Tensor mean3_filter(const torch::Tensor& x) {
  return F::avg_pool2d(replicate_pad1(x), F::AvgPool2dFuncOptions(3).stride(1));
}

torch::Tensor sobel_gradient_magnitude(const torch::Tensor& x) {
  const auto opts = torch::TensorOptions().dtype(x.dtype()).device(x.device());
  const auto kx = torch::tensor({-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0}, opts).view({1, 1, 3, 3});
  const auto ky = kx.transpose(2, 3).contiguous();
  const auto padded = replicate_pad1(x);
  const auto gx = F::conv2d(padded, kx);
  const auto gy = F::conv2d(padded, ky);
  const auto sq = gx.square() + gy.square();
  // sqrt has an unbounded derivative at 0; route zero entries through a
  // constant so the forward value stays exact and the gradient stays finite.
  const auto nonzero = sq > 0;
  return torch::sqrt(torch::where(nonzero, sq, torch::ones_like(sq))) * nonzero.to(sq.dtype());
}

torch::Tensor gradient_loss(const torch::Tensor& pred, const torch::Tensor& gt, double alpha) {
  require_same_shape(pred, gt, "gradient_loss");
  const auto gp = sobel_gradient_magnitude(mean3_filter(pred));
  const auto gg = sobel_gradient_magnitude(mean3_filter(gt.to(pred.dtype())));
  return alpha * (gp - gg).abs().mean();
}

torch::Tensor downscale_target(const torch::Tensor& gt, int stride) {
  if (stride == 1) return gt;
  auto avg = F::avg_pool2d(gt, F::AvgPool2dFuncOptions(stride)
                                   .stride(stride)
                                   .ceil_mode(true)
                                   .count_include_pad(false));
  return (avg >= 0.5).to(gt.dtype());
}

TotalLoss total_loss(const std::vector<StrideTensors>& levels, const torch::Tensor& gt,
                     const LossWeights& weights) {
  if (levels.empty()) throw std::invalid_argument("total_loss: empty level list");
  const auto gt8 = downscale_target(gt, 8);
  const auto gt4 = downscale_target(gt, 4);

  TotalLoss out;
  torch::Tensor sum;
  for (const auto& level : levels) {
    auto ce8 = ce_loss(level.p8, gt8);
    auto ce4 = ce_loss(level.p4, gt4);
    auto l4 = l1l2_loss(level.p4, gt4);
    auto l1 = l1l2_loss(level.p1, gt);
    auto g1 = gradient_loss(level.p1, gt, weights.alpha);
    auto total = ce8 + 0.5 * (l4 + ce4) + l1 + g1;
    sum = sum.defined() ? sum + total : total;

    LevelLoss rec;
    rec.ce8 = ce8.item<double>();
    rec.ce4 = ce4.item<double>();
    rec.l1l2_4 = l4.item<double>();
    rec.l1l2_1 = l1.item<double>();
    rec.grad1 = g1.item<double>();
    rec.total = combine_level(rec.ce8, rec.ce4, rec.l1l2_4, rec.l1l2_1, rec.grad1);
    out.breakdown.levels.push_back(rec);
    out.breakdown.total += rec.total;
  }
  out.total = sum;
  return out;
}

}  // namespace tensor

namespace {

torch::Tensor as_double(const Raster2D& r) { return to_tensor(r).to(torch::kFloat64); }

Raster2D from_double(const torch::Tensor& t) { return to_raster(t); }

void require_single(const Raster2D& a, const Raster2D& b, const char* what) {
  if (!a.same_shape(b) || a.channels() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected equal single-channel shapes");
  }
}

}  // namespace

double ce_loss(const ProbMask& pred, const BinaryMask& gt) {
  require_single(pred, gt, "ce_loss");
  return tensor::ce_loss(as_double(pred), as_double(gt)).item<double>();
}

double l1l2_loss(const ProbMask& pred, const BinaryMask& gt) {
  require_single(pred, gt, "l1l2_loss");
  return tensor::l1l2_loss(as_double(pred), as_double(gt)).item<double>();
}

ProbMask mean3_filter(const ProbMask& x) { return from_double(tensor::mean3_filter(as_double(x))); }

Raster2D sobel_gradient_magnitude(const ProbMask& x) {
  return from_double(tensor::sobel_gradient_magnitude(as_double(x)));
}

double gradient_loss(const ProbMask& pred, const BinaryMask& gt, double alpha) {
  require_single(pred, gt, "gradient_loss");
  return tensor::gradient_loss(as_double(pred), as_double(gt), alpha).item<double>();
}

LossBreakdown total_loss(const std::vector<StrideOutputs>& levels, const BinaryMask& gt,
                         const LossWeights& weights) {
  if (levels.empty()) throw std::invalid_argument("total_loss: empty level list");
  std::vector<StrideTensors> t;
  t.reserve(levels.size());
  for (const auto& l : levels) t.push_back({as_double(l.p8), as_double(l.p4), as_double(l.p1)});
  torch::NoGradGuard guard;
  return tensor::total_loss(t, as_double(gt), weights).breakdown;
}

}  // namespace segrefine
