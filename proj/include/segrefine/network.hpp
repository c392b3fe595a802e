#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "segrefine/raster.hpp"

namespace segrefine {

/// Shape of the refinement network. Channel counts are stored explicitly so a
/// checkpoint fully describes the layer layout it was written with.
struct RefinerConfig {
  double backbone_width = 1.0;
  std::vector<int> stage_depths{3, 4, 6, 3};
  std::vector<int> pyramid_bins{1, 2, 3, 6};
  int input_channels = 6;
  std::array<int, 3> head_strides{8, 4, 1};

  int stem_channels = 64;
  int psp_channels = 1024;
  int decoder4_channels = 256;
  int decoder1_channels = 32;

  /// ResNet-50 layout with every channel count scaled by `width`.
  static RefinerConfig with_width(double width, std::vector<int> depths = {3, 4, 6, 3});
  /// Single-core friendly layout used by the test suites and the toy training runs.
  static RefinerConfig toy();

  void validate() const;
  friend bool operator==(const RefinerConfig&, const RefinerConfig&) = default;
};

/// Per-head probabilities. Tensors are (N, 1, h, w); rasters are single-channel.
struct StrideTensors {
  torch::Tensor p8;
  torch::Tensor p4;
  torch::Tensor p1;
};

struct StrideOutputs {
  ProbMask p8;
  ProbMask p4;
  ProbMask p1;
};

struct CascadeTensors {
  std::vector<StrideTensors> levels;
  torch::Tensor s14;  // last level stride-4 head, upsampled to input size
  torch::Tensor s11;  // last level stride-1 head
};

struct CascadeOutputs {
  std::vector<StrideOutputs> levels;
  ProbMask s14;
  ProbMask s11;
};

/// Which cascade to run: the 3-level (8, 4, 1) Global cascade or the
/// 2-level (4, 1) Local cascade.
enum class CascadeKind { Global, Local };

/// Maps a stride list to a cascade kind; throws std::invalid_argument for
/// anything other than {8, 4, 1} or {4, 1}.
CascadeKind cascade_kind_from_strides(const std::vector<int>& strides);

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int in_channels, int planes, int stride, int dilation);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr}, bn3_{nullptr};
  torch::nn::Sequential downsample_{nullptr};
};
TORCH_MODULE(Bottleneck);

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Upsample the main branch to the skip resolution, concatenate, then two
/// residual blocks.
class UpBlockImpl : public torch::nn::Module {
 public:
  UpBlockImpl(int main_channels, int skip_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& main, const torch::Tensor& skip);

 private:
  ResBlock block1_{nullptr}, block2_{nullptr};
};
TORCH_MODULE(UpBlock);

class PyramidPoolingImpl : public torch::nn::Module {
 public:
  PyramidPoolingImpl(int in_channels, int out_channels, const std::vector<int>& bins);
  torch::Tensor forward(const torch::Tensor& x);
  const std::vector<int>& bins() const { return bins_; }
  /// Spatial size of each pooled grid from the last forward call.
  const std::vector<std::array<int64_t, 2>>& last_pooled_shapes() const { return last_shapes_; }

 private:
  std::vector<int> bins_;
  torch::nn::ModuleList stages_{nullptr};
  torch::nn::Conv2d bottleneck_{nullptr};
  std::vector<std::array<int64_t, 2>> last_shapes_;
};
TORCH_MODULE(PyramidPooling);

/// Two-layer 1x1 convolution followed by a sigmoid.
class HeadImpl : public torch::nn::Module {
 public:
  HeadImpl(int in_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(Head);

/// Refinement module: dilated bottleneck backbone to stride 8, pyramid pooling,
/// two upsampling blocks with backbone skips, and heads at strides 8, 4 and 1.
class RefinerNetImpl : public torch::nn::Module {
 public:
  explicit RefinerNetImpl(const RefinerConfig& config);

  /// image (N,3,H,W) in [0,1], masks (N,3,H,W) in [0,1]; H and W must be
  /// multiples of 8. Returns untrimmed heads at H/8, H/4 and H; the stride-1
  /// branch is skipped (p1 left undefined) when `with_fine` is false.
  StrideTensors forward(const torch::Tensor& image, const torch::Tensor& masks,
                        bool with_fine = true);

  const RefinerConfig& config() const { return config_; }
  PyramidPooling& pyramid() { return psp_; }

 private:
  RefinerConfig config_;
  torch::nn::Conv2d stem_conv_{nullptr};
  torch::nn::BatchNorm2d stem_bn_{nullptr};
  torch::nn::Sequential layer1_{nullptr}, layer2_{nullptr}, layer3_{nullptr}, layer4_{nullptr};
  PyramidPooling psp_{nullptr};
  UpBlock up4_{nullptr}, up1_{nullptr};
  Head head8_{nullptr}, head4_{nullptr}, head1_{nullptr};
};
TORCH_MODULE(RefinerNet);

/// Owns a refinement network. Copies share weights (torch module holder
/// semantics); use clone() for an independent copy.
class RefinerModel {
 public:
  RefinerModel(const RefinerConfig& config, std::uint64_t seed);

  const RefinerConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  RefinerNet& net() { return net_; }
  const RefinerNet& net() const { return net_; }
  std::int64_t parameter_count() const;
  RefinerModel clone() const;

  /// eval() also stores conv weights channels-last; train() restores the
  /// plain layout.
  void train(bool on = true);
  void eval();

 private:
  RefinerConfig config_;
  std::uint64_t seed_;
  RefinerNet net_{nullptr};
};

/// Throws std::invalid_argument for invalid configurations (e.g. bad pyramid bins).
RefinerModel build_refiner(const RefinerConfig& config, std::uint64_t seed);

// --- tensor level (differentiable) --------------------------------------

/// Runs one refinement pass on arbitrary H x W: reflect-pads to a multiple of
/// 8, then trims each head to ceil(H / stride) x ceil(W / stride).
StrideTensors rm_forward(RefinerNet& net, const torch::Tensor& image, const torch::Tensor& masks);

/// Channel-replacement cascade. For the Global kind both seeds are the
/// initial mask; for the Local kind `seed_fine` is S11 and `seed_coarse` S14.
CascadeTensors cascade_forward(RefinerNet& net, const torch::Tensor& image,
                               const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                               CascadeKind kind);

/// The (initial, coarse, fine) slot tensors for every level of a cascade.
/// Exposed for wiring checks; cascade_forward uses the same construction.
using StackRecorder = std::function<void(int level, const torch::Tensor& initial,
                                         const torch::Tensor& coarse, const torch::Tensor& fine)>;
CascadeTensors cascade_forward(RefinerNet& net, const torch::Tensor& image,
                               const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                               CascadeKind kind, const StackRecorder& recorder);

/// Same cascade, but intermediate levels skip their unused stride-1 branch.
/// Only s11, s14 and the last level's heads are meaningful; the other levels'
/// p1 tensors are undefined.
CascadeTensors cascade_final(RefinerNet& net, const torch::Tensor& image,
                             const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                             CascadeKind kind);

// --- raster level (inference, no autograd) ------------------------------

torch::Tensor to_tensor(const Raster2D& r);  // (1, C, H, W) float32
Raster2D to_raster(const torch::Tensor& t);  // accepts (1, C, H, W) or (C, H, W)

StrideOutputs rm_forward(RefinerModel& model, const Raster2D& image, const MaskStack& masks);
CascadeOutputs cascade_forward(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                               const std::vector<int>& levels);
/// Local-kind cascade with explicit (S11, S14) seeds.
CascadeOutputs cascade_forward(RefinerModel& model, const Raster2D& image, const ProbMask& seed_fine,
                               const ProbMask& seed_coarse, const std::vector<int>& levels);
/// Inference shortcut returning only s11 and s14 (levels left empty).
CascadeOutputs cascade_final(RefinerModel& model, const Raster2D& image, const ProbMask& seed_fine,
                             const ProbMask& seed_coarse, const std::vector<int>& levels);

}  // namespace segrefine
