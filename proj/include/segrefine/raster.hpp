#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace segrefine {

/// Dense row-major (row, col, channel) raster of 32-bit reals.
///
/// Images, probability masks and binary masks all share this container; the
/// mask flavours are distinguished by the value-range checks below rather than
/// by separate storage types.
class Raster2D {
 public:
  Raster2D() = default;
  /// Throws std::invalid_argument when any dimension is < 1.
  Raster2D(int height, int width, int channels, float fill = 0.0f);
  Raster2D(int height, int width, int channels, std::vector<float> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float& at(int row, int col, int ch = 0) { return values_[index(row, col, ch)]; }
  float at(int row, int col, int ch = 0) const { return values_[index(row, col, ch)]; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool same_shape(const Raster2D& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_extent(const Raster2D& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;

  friend bool operator==(const Raster2D&, const Raster2D&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

/// Single-channel raster with every value in [0, 1].
using ProbMask = Raster2D;
/// Single-channel raster with every value in {0, 1}.
using BinaryMask = Raster2D;

bool is_prob_mask(const Raster2D& r);
bool is_binary_mask(const Raster2D& r);

/// Threshold a probability mask: value >= threshold -> 1, else 0.
BinaryMask binarize(const ProbMask& p, float threshold = 0.5f);

/// Axis-aligned crop bookkeeping, in pixels.
struct BoxRegion {
  int top = 0;
  int left = 0;
  int height = 1;
  int width = 1;

  int bottom() const { return top + height; }  // exclusive
  int right() const { return left + width; }   // exclusive
  bool fits_inside(int extent_h, int extent_w) const {
    return top >= 0 && left >= 0 && height >= 1 && width >= 1 && bottom() <= extent_h &&
           right() <= extent_w;
  }
  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

/// The three mask channels fed to one refinement pass, ordered
/// (initial, coarse, fine).
struct MaskStack {
  ProbMask initial;
  ProbMask coarse;
  ProbMask fine;

  /// Replace slot 1 (initial), 2 (coarse) or 3 (fine).
  void replace(int slot, ProbMask mask);
  const ProbMask& slot(int index) const;
  int height() const { return initial.height(); }
  int width() const { return initial.width(); }
};

/// Bilinear resampling with half-pixel-center alignment. The source position of
/// output pixel i is (i + 0.5) * in/out - 0.5, clamped to the valid range.
Raster2D bilinear_resize(const Raster2D& src, int out_h, int out_w);

/// Copy of the pixels inside `box`. Throws std::invalid_argument when the box
/// leaves the raster.
Raster2D extract_crop(const Raster2D& src, const BoxRegion& box);

/// Write `patch` into `dst` at (top, left); the patch must fit.
void paste(Raster2D& dst, const Raster2D& patch, int top, int left);

/// Shrinks so that max(h, w) == long_axis with the short axis rounded half up.
/// Rasters already within the limit come back unchanged with scale 1.
std::pair<Raster2D, double> downsample_to_long_axis(const Raster2D& src, int long_axis);

/// Output size of downsample_to_long_axis without touching pixel data.
std::pair<int, int> long_axis_extent(int height, int width, int long_axis);

MaskStack make_mask_stack(const ProbMask& init);

/// Reflect-pad (mirror without repeating the edge pixel) on the bottom and
/// right edges.
Raster2D pad_reflect(const Raster2D& src, int pad_bottom, int pad_right);

/// Concatenate rasters of equal extent along the channel axis.
Raster2D stack_channels(std::span<const Raster2D> parts);

/// Extract one channel as a single-channel raster.
Raster2D channel(const Raster2D& src, int ch);

}  // namespace segrefine
