#include "segrefine/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace segrefine {

namespace {

void check_dims(int h, int w, int c) {
  if (h < 1 || w < 1 || c < 1) {
    throw std::invalid_argument("raster dimensions must be >= 1, got " + std::to_string(h) + "x" +
                                std::to_string(w) + "x" + std::to_string(c));
  }
}

// Mirror index into [0, n) without repeating the edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double pos = (i + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

Raster2D::Raster2D(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Raster2D::Raster2D(int height, int width, int channels, std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  check_dims(height, width, channels);
  if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("raster value count does not match dimensions");
  }
}

bool Raster2D::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

bool is_prob_mask(const Raster2D& r) {
  if (r.channels() != 1) return false;
  const auto v = r.values();
  return std::all_of(v.begin(), v.end(), [](float x) { return x >= 0.0f && x <= 1.0f; });
}

bool is_binary_mask(const Raster2D& r) {
  if (r.channels() != 1) return false;
  const auto v = r.values();
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f || x == 1.0f; });
}

BinaryMask binarize(const ProbMask& p, float threshold) {
  BinaryMask out(p.height(), p.width(), p.channels());
  auto src = p.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1.0f : 0.0f;
  return out;
}

void MaskStack::replace(int slot, ProbMask mask) {
  if (!initial.empty() && !mask.same_extent(initial)) {
    throw std::invalid_argument("mask stack channels must share one extent");
  }
  switch (slot) {
    case 1: initial = std::move(mask); break;
    case 2: coarse = std::move(mask); break;
    case 3: fine = std::move(mask); break;
    default: throw std::invalid_argument("mask stack slot must be 1, 2 or 3");
  }
}

const ProbMask& MaskStack::slot(int index) const {
  switch (index) {
    case 1: return initial;
    case 2: return coarse;
    case 3: return fine;
    default: throw std::invalid_argument("mask stack slot must be 1, 2 or 3");
  }
}

Raster2D bilinear_resize(const Raster2D& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("bilinear_resize: target dimensions must be >= 1");
  }
  if (out_h == src.height() && out_w == src.width()) return src;

  const auto ty = make_taps(src.height(), out_h);
  const auto tx = make_taps(src.width(), out_w);
  const int ch = src.channels();
  Raster2D out(out_h, out_w, ch);
  for (int r = 0; r < out_h; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < out_w; ++c) {
      const Tap& x = tx[c];
      for (int k = 0; k < ch; ++k) {
        // lerp form keeps constant regions exact
        const double a = src.at(y.lo, x.lo, k);
        const double b = src.at(y.lo, x.hi, k);
        const double cc = src.at(y.hi, x.lo, k);
        const double d = src.at(y.hi, x.hi, k);
        const double top = a + (b - a) * x.frac;
        const double bot = cc + (d - cc) * x.frac;
        out.at(r, c, k) = static_cast<float>(top + (bot - top) * y.frac);
      }
    }
  }
  return out;
}

Raster2D extract_crop(const Raster2D& src, const BoxRegion& box) {
  if (!box.fits_inside(src.height(), src.width())) {
    throw std::invalid_argument("extract_crop: box (" + std::to_string(box.top) + "," +
                                std::to_string(box.left) + ") " + std::to_string(box.height) + "x" +
                                std::to_string(box.width) + " outside raster " +
                                std::to_string(src.height()) + "x" + std::to_string(src.width()));
  }
  const int ch = src.channels();
  Raster2D out(box.height, box.width, ch);
  auto sv = src.values();
  auto dv = out.values();
  const std::size_t row_len = static_cast<std::size_t>(box.width) * ch;
  for (int r = 0; r < box.height; ++r) {
    const std::size_t so = (static_cast<std::size_t>(box.top + r) * src.width() + box.left) * ch;
    std::copy_n(sv.begin() + so, row_len, dv.begin() + static_cast<std::size_t>(r) * row_len);
  }
  return out;
}

void paste(Raster2D& dst, const Raster2D& patch, int top, int left) {
  const BoxRegion box{top, left, patch.height(), patch.width()};
  if (!box.fits_inside(dst.height(), dst.width()) || patch.channels() != dst.channels()) {
    throw std::invalid_argument("paste: patch does not fit destination");
  }
  const int ch = dst.channels();
  auto sv = patch.values();
  auto dv = dst.values();
  const std::size_t row_len = static_cast<std::size_t>(patch.width()) * ch;
  for (int r = 0; r < patch.height(); ++r) {
    const std::size_t d = (static_cast<std::size_t>(top + r) * dst.width() + left) * ch;
    std::copy_n(sv.begin() + static_cast<std::size_t>(r) * row_len, row_len, dv.begin() + d);
  }
}

std::pair<int, int> long_axis_extent(int height, int width, int long_axis) {
  if (long_axis < 1) throw std::invalid_argument("long_axis must be >= 1");
  const int longest = std::max(height, width);
  if (longest <= long_axis) return {height, width};
  // round half up: floor(short * L / long + 1/2) in integer arithmetic
  auto shrink = [&](int extent) {
    if (extent == longest) return long_axis;
    const long long num = 2LL * extent * long_axis + longest;
    return std::max(1, static_cast<int>(num / (2LL * longest)));
  };
  return {shrink(height), shrink(width)};
}

std::pair<Raster2D, double> downsample_to_long_axis(const Raster2D& src, int long_axis) {
  const auto [h, w] = long_axis_extent(src.height(), src.width(), long_axis);
  if (h == src.height() && w == src.width()) return {src, 1.0};
  const double scale = static_cast<double>(long_axis) / std::max(src.height(), src.width());
  return {bilinear_resize(src, h, w), scale};
}

MaskStack make_mask_stack(const ProbMask& init) { return MaskStack{init, init, init}; }

Raster2D pad_reflect(const Raster2D& src, int pad_bottom, int pad_right) {
  if (pad_bottom < 0 || pad_right < 0) throw std::invalid_argument("pad_reflect: negative pad");
  if (pad_bottom == 0 && pad_right == 0) return src;
  const int h = src.height() + pad_bottom;
  const int w = src.width() + pad_right;
  const int ch = src.channels();
  Raster2D out(h, w, ch);
  for (int r = 0; r < h; ++r) {
    const int sr = reflect_index(r, src.height());
    for (int c = 0; c < w; ++c) {
      const int sc = reflect_index(c, src.width());
      for (int k = 0; k < ch; ++k) out.at(r, c, k) = src.at(sr, sc, k);
    }
  }
  return out;
}

Raster2D stack_channels(std::span<const Raster2D> parts) {
  if (parts.empty()) throw std::invalid_argument("stack_channels: nothing to stack");
  int total = 0;
  for (const auto& p : parts) {
    if (!p.same_extent(parts.front())) {
      throw std::invalid_argument("stack_channels: extents differ");
    }
    total += p.channels();
  }
  const int h = parts.front().height();
  const int w = parts.front().width();
  Raster2D out(h, w, total);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int k = 0;
      for (const auto& p : parts) {
        for (int j = 0; j < p.channels(); ++j) out.at(r, c, k++) = p.at(r, c, j);
      }
    }
  }
  return out;
}

Raster2D channel(const Raster2D& src, int ch) {
  if (ch < 0 || ch >= src.channels()) throw std::invalid_argument("channel index out of range");
  Raster2D out(src.height(), src.width(), 1);
  for (int r = 0; r < src.height(); ++r) {
    for (int c = 0; c < src.width(); ++c) out.at(r, c) = src.at(r, c, ch);
  }
  return out;
}

}  // namespace segrefine
