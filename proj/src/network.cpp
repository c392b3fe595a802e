#include "segrefine/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segrefine {

namespace F = torch::nn::functional;

namespace {

int scaled(int base, double width) {
  return std::max(4, static_cast<int>(std::lround(base * width)));
}

torch::nn::Conv2d conv(int in, int out, int k, int stride = 1, int dilation = 1, bool bias = false) {
  const int pad = dilation * (k - 1) / 2;
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k)
                               .stride(stride)
                               .padding(pad)
                               .dilation(dilation)
                               .bias(bias));
}

torch::Tensor resize_to(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Reflect padding needs pad < extent; fall back to replicate on tiny inputs.
torch::Tensor pad_to_multiple(const torch::Tensor& x, int64_t ph, int64_t pw) {
  if (ph == 0 && pw == 0) return x;
  const bool reflect_ok = ph < x.size(2) && pw < x.size(3);
  F::PadFuncOptions opts({0, pw, 0, ph});
  if (reflect_ok) {
    opts.mode(torch::kReflect);
  } else {
    opts.mode(torch::kReplicate);
  }
  return F::pad(x, opts);
}

torch::Tensor trim(const torch::Tensor& x, int64_t h, int64_t w) {
  return x.index({torch::indexing::Slice(), torch::indexing::Slice(),
                  torch::indexing::Slice(0, h), torch::indexing::Slice(0, w)});
}

torch::Tensor image_mean() { return torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1}); }
torch::Tensor image_std() { return torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1}); }

torch::nn::Sequential make_layer(int& in_channels, int planes, int depth, int stride, int dilation) {
  torch::nn::Sequential layer;
  for (int i = 0; i < depth; ++i) {
    layer->push_back(Bottleneck(in_channels, planes, i == 0 ? stride : 1, dilation));
    in_channels = planes * 4;
  }
  return layer;
}

}  // namespace

RefinerConfig RefinerConfig::with_width(double width, std::vector<int> depths) {
  RefinerConfig c;
  c.backbone_width = width;
  c.stage_depths = std::move(depths);
  c.stem_channels = scaled(64, width);
  c.psp_channels = scaled(1024, width);
  c.decoder4_channels = scaled(256, width);
  c.decoder1_channels = scaled(32, width);
  return c;
}

RefinerConfig RefinerConfig::toy() {
  RefinerConfig c = with_width(0.125, {1, 1, 1, 1});
  c.psp_channels = 64;
  c.decoder4_channels = 16;
  c.decoder1_channels = 8;
  return c;
}

void RefinerConfig::validate() const {
  if (!(backbone_width > 0.0) || !std::isfinite(backbone_width)) {
    throw std::invalid_argument("backbone_width must be positive");
  }
  if (stage_depths.size() != 4 ||
      std::any_of(stage_depths.begin(), stage_depths.end(), [](int d) { return d < 1; })) {
    throw std::invalid_argument("stage_depths must hold four depths >= 1");
  }
  if (pyramid_bins.empty() ||
      std::any_of(pyramid_bins.begin(), pyramid_bins.end(), [](int b) { return b < 1; })) {
    throw std::invalid_argument("pyramid_bins must be a non-empty list of sizes >= 1");
  }
  for (std::size_t i = 1; i < pyramid_bins.size(); ++i) {
    if (pyramid_bins[i] <= pyramid_bins[i - 1]) {
      throw std::invalid_argument("pyramid_bins must be strictly increasing");
    }
  }
  if (input_channels != 6) throw std::invalid_argument("input_channels must be 6 (RGB + 3 masks)");
  if (head_strides != std::array<int, 3>{8, 4, 1}) {
    throw std::invalid_argument("head_strides must be exactly {8, 4, 1}");
  }
  if (stem_channels < 1 || psp_channels < 1 || decoder4_channels < 1 || decoder1_channels < 1) {
    throw std::invalid_argument("channel counts must be >= 1");
  }
}

CascadeKind cascade_kind_from_strides(const std::vector<int>& strides) {
  if (strides == std::vector<int>{8, 4, 1}) return CascadeKind::Global;
  if (strides == std::vector<int>{4, 1}) return CascadeKind::Local;
  throw std::invalid_argument("cascade levels must be (8, 4, 1) or (4, 1)");
}

// --- building blocks -------------------------------------------------------

BottleneckImpl::BottleneckImpl(int in_channels, int planes, int stride, int dilation) {
  conv1_ = register_module("conv1", conv(in_channels, planes, 1));
  bn1_ = register_module("bn1", torch::nn::BatchNorm2d(planes));
  conv2_ = register_module("conv2", conv(planes, planes, 3, stride, dilation));
  bn2_ = register_module("bn2", torch::nn::BatchNorm2d(planes));
  conv3_ = register_module("conv3", conv(planes, planes * 4, 1));
  bn3_ = register_module("bn3", torch::nn::BatchNorm2d(planes * 4));
  if (stride != 1 || in_channels != planes * 4) {
    downsample_ = register_module(
        "downsample", torch::nn::Sequential(conv(in_channels, planes * 4, 1, stride),
                                            torch::nn::BatchNorm2d(planes * 4)));
  }
}

torch::Tensor BottleneckImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1_(conv1_(x)));
  y = torch::relu(bn2_(conv2_(y)));
  y = bn3_(conv3_(y));
  auto identity = downsample_ ? downsample_->forward(x) : x;
  return torch::relu(y + identity);
}

ResBlockImpl::ResBlockImpl(int in_channels, int out_channels) {
  conv1_ = register_module("conv1", conv(in_channels, out_channels, 3, 1, 1, true));
  conv2_ = register_module("conv2", conv(out_channels, out_channels, 3, 1, 1, true));
  if (in_channels != out_channels) {
    shortcut_ = register_module("shortcut", conv(in_channels, out_channels, 1, 1, 1, true));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv2_(torch::relu(conv1_(x)));
  return torch::relu(y + (shortcut_ ? shortcut_(x) : x));
}

UpBlockImpl::UpBlockImpl(int main_channels, int skip_channels, int out_channels) {
  block1_ = register_module("block1", ResBlock(main_channels + skip_channels, out_channels));
  block2_ = register_module("block2", ResBlock(out_channels, out_channels));
}

torch::Tensor UpBlockImpl::forward(const torch::Tensor& main, const torch::Tensor& skip) {
  auto up = resize_to(main, skip.size(2), skip.size(3));
  return block2_(block1_(torch::cat({up, skip}, 1)));
}

PyramidPoolingImpl::PyramidPoolingImpl(int in_channels, int out_channels,
                                       const std::vector<int>& bins)
    : bins_(bins) {
  const int branch = std::max(1, in_channels / static_cast<int>(bins.size()));
  stages_ = register_module("stages", torch::nn::ModuleList());
  for (std::size_t i = 0; i < bins.size(); ++i) stages_->push_back(conv(in_channels, branch, 1));
  bottleneck_ = register_module(
      "bottleneck",
      conv(in_channels + branch * static_cast<int>(bins.size()), out_channels, 1, 1, 1, true));
}

torch::Tensor PyramidPoolingImpl::forward(const torch::Tensor& x) {
  const auto h = x.size(2);
  const auto w = x.size(3);
  std::vector<torch::Tensor> parts{x};
  last_shapes_.clear();
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(bins_[i]));
    last_shapes_.push_back({pooled.size(2), pooled.size(3)});
    auto projected = stages_[i]->as<torch::nn::Conv2dImpl>()->forward(pooled);
    parts.push_back(resize_to(projected, h, w));
  }
  return torch::relu(bottleneck_(torch::cat(parts, 1)));
}

HeadImpl::HeadImpl(int in_channels) {
  const int hidden = std::max(4, in_channels / 2);
  conv1_ = register_module("conv1", conv(in_channels, hidden, 1, 1, 1, true));
  conv2_ = register_module("conv2", conv(hidden, 1, 1, 1, 1, true));
}

torch::Tensor HeadImpl::forward(const torch::Tensor& x) {
  return torch::sigmoid(conv2_(torch::relu(conv1_(x))));
}

// --- network ---------------------------------------------------------------

RefinerNetImpl::RefinerNetImpl(const RefinerConfig& config) : config_(config) {
  config_.validate();
  const double w = config_.backbone_width;
  const auto& d = config_.stage_depths;

  stem_conv_ = register_module("stem_conv", conv(config_.input_channels, config_.stem_channels, 7, 2));
  stem_bn_ = register_module("stem_bn", torch::nn::BatchNorm2d(config_.stem_channels));

  int ch = config_.stem_channels;
  layer1_ = register_module("layer1", make_layer(ch, scaled(64, w), d[0], 1, 1));
  const int f4_channels = ch;
  layer2_ = register_module("layer2", make_layer(ch, scaled(128, w), d[1], 2, 1));
  // stride stays at 8 from here on; dilation grows the receptive field instead
  layer3_ = register_module("layer3", make_layer(ch, scaled(256, w), d[2], 1, 2));
  layer4_ = register_module("layer4", make_layer(ch, scaled(512, w), d[3], 1, 4));

  psp_ = register_module("psp", PyramidPooling(ch, config_.psp_channels, config_.pyramid_bins));
  up4_ = register_module("up4", UpBlock(config_.psp_channels, f4_channels, config_.decoder4_channels));
  up1_ = register_module("up1", UpBlock(config_.decoder4_channels,
                                        config_.stem_channels + config_.input_channels,
                                        config_.decoder1_channels));
  head8_ = register_module("head8", Head(config_.psp_channels));
  head4_ = register_module("head4", Head(config_.decoder4_channels));
  head1_ = register_module("head1", Head(config_.decoder1_channels));
}

StrideTensors RefinerNetImpl::forward(const torch::Tensor& image, const torch::Tensor& masks,
                                      bool with_fine) {
  const auto h = image.size(2);
  const auto w = image.size(3);
  if (h % 8 != 0 || w % 8 != 0) {
    throw std::invalid_argument("RefinerNet::forward expects extents divisible by 8");
  }
  auto img = (image - image_mean().to(image.dtype())) / image_std().to(image.dtype());
  auto x = torch::cat({img, (masks - 0.5) / 0.5}, 1);

  auto f2 = torch::relu(stem_bn_(stem_conv_(x)));
  auto f4 = layer1_->forward(F::max_pool2d(f2, F::MaxPool2dFuncOptions(3).stride(2).padding(1)));
  auto f8 = layer4_->forward(layer3_->forward(layer2_->forward(f4)));

  auto p = psp_(f8);
  StrideTensors out;
  out.p8 = head8_(p);
  auto d4 = up4_(p, f4);
  out.p4 = head4_(d4);
  if (!with_fine) return out;
  auto skip1 = torch::cat({resize_to(f2, h, w), x}, 1);
  out.p1 = head1_(up1_(d4, skip1));
  return out;
}

// --- model -----------------------------------------------------------------

RefinerModel::RefinerModel(const RefinerConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  torch::manual_seed(seed);
  net_ = RefinerNet(config_);
}

std::int64_t RefinerModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : net_->parameters()) n += p.numel();
  return n;
}

RefinerModel RefinerModel::clone() const {
  RefinerModel copy(config_, seed_);
  torch::NoGradGuard guard;
  auto dst = copy.net_->named_parameters();
  for (const auto& item : net_->named_parameters()) dst[item.key()].copy_(item.value());
  auto dst_buf = copy.net_->named_buffers();
  for (const auto& item : net_->named_buffers()) dst_buf[item.key()].copy_(item.value());
  copy.net_->train(net_->is_training());
  return copy;
}

namespace {

void set_weight_layout(RefinerNet& net, torch::MemoryFormat format) {
  torch::NoGradGuard guard;
  for (auto& p : net->parameters()) {
    if (p.dim() == 4) p.set_data(p.contiguous(format));
  }
}

}  // namespace

void RefinerModel::train(bool on) {
  if (!on) return eval();
  set_weight_layout(net_, torch::MemoryFormat::Contiguous);
  net_->train(true);
}

void RefinerModel::eval() {
  set_weight_layout(net_, torch::MemoryFormat::ChannelsLast);
  net_->eval();
}

RefinerModel build_refiner(const RefinerConfig& config, std::uint64_t seed) {
  return RefinerModel(config, seed);
}

// --- tensor-level passes ---------------------------------------------------

StrideTensors rm_forward(RefinerNet& net, const torch::Tensor& image, const torch::Tensor& masks) {
  if (image.dim() != 4 || masks.dim() != 4 || image.size(1) != 3 || masks.size(1) != 3) {
    throw std::invalid_argument("rm_forward expects (N,3,H,W) image and masks");
  }
  if (image.size(0) != masks.size(0) || image.size(2) != masks.size(2) ||
      image.size(3) != masks.size(3)) {
    throw std::invalid_argument("rm_forward: image and masks must share batch and extent");
  }
  const auto h = image.size(2);
  const auto w = image.size(3);
  const auto ph = ceil_div(h, 8) * 8 - h;
  const auto pw = ceil_div(w, 8) * 8 - w;
  auto out = net->forward(pad_to_multiple(image, ph, pw), pad_to_multiple(masks, ph, pw));
  return {trim(out.p8, ceil_div(h, 8), ceil_div(w, 8)), trim(out.p4, ceil_div(h, 4), ceil_div(w, 4)),
          trim(out.p1, h, w)};
}

CascadeTensors cascade_forward(RefinerNet& net, const torch::Tensor& image,
                               const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                               CascadeKind kind) {
  return cascade_forward(net, image, seed_fine, seed_coarse, kind, {});
}

namespace {

CascadeTensors run_cascade(RefinerNet& net, const torch::Tensor& image, const torch::Tensor& seed_fine,
                           const torch::Tensor& seed_coarse, CascadeKind kind,
                           const StackRecorder& recorder, bool all_fine) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw std::invalid_argument("cascade_forward expects an (N,3,H,W) image");
  }
  for (const auto* s : {&seed_fine, &seed_coarse}) {
    if (s->dim() != 4 || s->size(1) != 1 || s->size(0) != image.size(0) ||
        s->size(2) != image.size(2) || s->size(3) != image.size(3)) {
      throw std::invalid_argument("cascade_forward: seeds must be (N,1,H,W) matching the image");
    }
  }
  const auto h = image.size(2);
  const auto w = image.size(3);
  const auto hp = ceil_div(h, 8) * 8;
  const auto wp = ceil_div(w, 8) * 8;
  // The whole cascade runs at the padded extent so that upsampled intermediate
  // heads stay pixel-aligned; outputs are trimmed at the end.
  const auto img = pad_to_multiple(image, hp - h, wp - w);
  const auto initial = pad_to_multiple(seed_fine, hp - h, wp - w);
  const auto coarse_seed = pad_to_multiple(seed_coarse, hp - h, wp - w);

  const int last = kind == CascadeKind::Global ? 3 : 2;
  auto run = [&](int level, const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& c) {
    if (recorder) recorder(level, a, b, c);
    return net->forward(img, torch::cat({a, b, c}, 1), all_fine || level == last);
  };

  std::vector<StrideTensors> raw;
  if (kind == CascadeKind::Global) {
    raw.push_back(run(1, initial, initial, initial));
    const auto up8 = resize_to(raw[0].p8, hp, wp);
    raw.push_back(run(2, initial, up8, up8));
    const auto up4 = resize_to(raw[1].p4, hp, wp);
    raw.push_back(run(3, initial, up8, up4));
  } else {
    raw.push_back(run(1, initial, coarse_seed, coarse_seed));
    const auto up4 = resize_to(raw[0].p4, hp, wp);
    raw.push_back(run(2, initial, coarse_seed, up4));
  }

  CascadeTensors out;
  for (const auto& r : raw) {
    out.levels.push_back({trim(r.p8, ceil_div(h, 8), ceil_div(w, 8)),
                          trim(r.p4, ceil_div(h, 4), ceil_div(w, 4)),
                          r.p1.defined() ? trim(r.p1, h, w) : torch::Tensor()});
  }
  out.s14 = trim(resize_to(raw.back().p4, hp, wp), h, w);
  out.s11 = out.levels.back().p1;
  return out;
}

}  // namespace

CascadeTensors cascade_forward(RefinerNet& net, const torch::Tensor& image,
                               const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                               CascadeKind kind, const StackRecorder& recorder) {
  return run_cascade(net, image, seed_fine, seed_coarse, kind, recorder, true);
}

CascadeTensors cascade_final(RefinerNet& net, const torch::Tensor& image,
                             const torch::Tensor& seed_fine, const torch::Tensor& seed_coarse,
                             CascadeKind kind) {
  return run_cascade(net, image, seed_fine, seed_coarse, kind, {}, false);
}

// --- raster-level passes ---------------------------------------------------

torch::Tensor to_tensor(const Raster2D& r) {
  auto hwc = torch::from_blob(const_cast<float*>(r.values().data()),
                              {r.height(), r.width(), r.channels()}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

Raster2D to_raster(const torch::Tensor& t) {
  auto x = t.dim() == 4 ? t.squeeze(0) : t;
  if (x.dim() != 3) throw std::invalid_argument("to_raster expects (1,C,H,W) or (C,H,W)");
  auto hwc = x.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  const auto* p = hwc.data_ptr<float>();
  std::vector<float> v(p, p + hwc.numel());
  return Raster2D(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)),
                  static_cast<int>(hwc.size(2)), std::move(v));
}

namespace {

void require_image_and_mask(const Raster2D& image, const Raster2D& mask) {
  if (image.channels() != 3) throw std::invalid_argument("image must have 3 channels");
  if (!image.same_extent(mask) || mask.channels() != 1) {
    throw std::invalid_argument("mask must be single-channel with the image's extent");
  }
}

CascadeOutputs to_outputs(const CascadeTensors& t) {
  CascadeOutputs out;
  for (const auto& l : t.levels) out.levels.push_back({to_raster(l.p8), to_raster(l.p4), to_raster(l.p1)});
  out.s14 = to_raster(t.s14);
  out.s11 = to_raster(t.s11);
  return out;
}

}  // namespace

StrideOutputs rm_forward(RefinerModel& model, const Raster2D& image, const MaskStack& masks) {
  require_image_and_mask(image, masks.initial);
  require_image_and_mask(image, masks.coarse);
  require_image_and_mask(image, masks.fine);
  torch::NoGradGuard guard;
  const std::array<Raster2D, 3> parts{masks.initial, masks.coarse, masks.fine};
  auto out = rm_forward(model.net(), to_tensor(image), to_tensor(stack_channels(parts)));
  return {to_raster(out.p8), to_raster(out.p4), to_raster(out.p1)};
}

CascadeOutputs cascade_forward(RefinerModel& model, const Raster2D& image, const ProbMask& init,
                               const std::vector<int>& levels) {
  return cascade_forward(model, image, init, init, levels);
}

CascadeOutputs cascade_forward(RefinerModel& model, const Raster2D& image, const ProbMask& seed_fine,
                               const ProbMask& seed_coarse, const std::vector<int>& levels) {
  const auto kind = cascade_kind_from_strides(levels);
  require_image_and_mask(image, seed_fine);
  require_image_and_mask(image, seed_coarse);
  torch::NoGradGuard guard;
  return to_outputs(cascade_forward(model.net(), to_tensor(image), to_tensor(seed_fine),
                                    to_tensor(seed_coarse), kind));
}

CascadeOutputs cascade_final(RefinerModel& model, const Raster2D& image, const ProbMask& seed_fine,
                             const ProbMask& seed_coarse, const std::vector<int>& levels) {
  const auto kind = cascade_kind_from_strides(levels);
  require_image_and_mask(image, seed_fine);
  require_image_and_mask(image, seed_coarse);
  torch::NoGradGuard guard;
  const auto t = cascade_final(model.net(), to_tensor(image), to_tensor(seed_fine),
                               to_tensor(seed_coarse), kind);
  CascadeOutputs out;
  out.s14 = to_raster(t.s14);
  out.s11 = to_raster(t.s11);
  return out;
}

}  // namespace segrefine
