#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "segrefine/raster.hpp"

namespace segrefine {

/// Raised when a metric is asked for on input where it has no definition
/// (e.g. boundary accuracy on a single-class ground truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using RadiiSchedule = std::array<double, 5>;

/// Five evenly spaced radii from 3 to max(3, (w + h) / 300).
RadiiSchedule radii_schedule(int width, int height);

/// Euclidean distance of every pixel to the nearest boundary pixel, where a
/// boundary pixel has at least one 4-neighbour of the other class.
struct BoundaryDistanceMap {
  int height = 0;
  int width = 0;
  std::vector<long long> squared;  // exact integer squared distances
  double distance(int row, int col) const;
};

double iou(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary pixel indicator (row-major) of a binary mask.
std::vector<unsigned char> boundary_pixels(const BinaryMask& gt);

/// Throws UndefinedMetricError when `gt` holds a single class.
BoundaryDistanceMap boundary_distance_map(const BinaryMask& gt);

/// Mean over the radii schedule of pixel accuracy restricted to
/// {distance to gt boundary <= r}.
double mba(const BinaryMask& pred, const BinaryMask& gt);

struct ImageScore {
  std::string id;
  double iou = 0.0;
  double mba = 0.0;  // NaN when undefined (single-class ground truth)
};

struct EvalReport {
  std::vector<ImageScore> images;
  double mean_iou() const;
  double mean_mba() const;  // over images with a defined mBA

  /// Fixed-width table: one row per image plus a trailing mean row.
  void write_table(std::ostream& os) const;
  /// One `key=value` line per entry: image.<id>.iou, image.<id>.mba,
  /// mean.iou, mean.mba, count.
  void write_key_values(std::ostream& os) const;
};

}  // namespace segrefine
