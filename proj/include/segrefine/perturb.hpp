#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "segrefine/raster.hpp"

namespace segrefine {

/// Ground-truth degradation settings. Radii are given at `reference_size`
/// and scale with max(height, width) / reference_size.
struct PerturbParams {
  double keep_min = 0.25;  // fraction of contour points kept
  double keep_max = 0.6;
  int ops_min = 1;  // number of random dilations / erosions
  int ops_max = 3;
  double radius_min = 2.0;
  double radius_max = 10.0;
  int reference_size = 224;
  std::uint64_t seed = 0;

  void validate() const;
};

using Contour = std::vector<std::array<int, 2>>;  // (row, col) points in tracing order

/// Connected components of the foreground under 8-connectivity, as label
/// images (0 = background, 1..n = component).
std::vector<int> label_components_8(const BinaryMask& mask, int& count);

/// Outer border of every 8-connected component, traced clockwise with Moore
/// neighbour following, starting at the component's first pixel in raster order.
std::vector<Contour> trace_contours(const BinaryMask& mask);

/// Even-odd scanline fill of the closed polygon plus its rasterized edges.
BinaryMask fill_polygon(const Contour& polygon, int height, int width);

/// Disk dilation / erosion of radius `radius` (pixels within Euclidean
/// distance <= radius). Pixels outside the frame count as absent for both.
BinaryMask dilate_disk(const BinaryMask& mask, double radius);
BinaryMask erode_disk(const BinaryMask& mask, double radius);

/// Contour subsampling, polygon refill and 1-3 random disk morphology steps.
/// Empty masks come back empty. When the result happens to equal `gt`, one
/// extra dilation at radius_min is applied so the output always differs from a
/// non-trivial input.
BinaryMask perturb_mask(const BinaryMask& gt, const PerturbParams& params, std::mt19937_64& rng);

/// Independent generator for stream `stream` of a root seed.
std::mt19937_64 split_rng(std::uint64_t root_seed, std::uint64_t stream);

}  // namespace segrefine
