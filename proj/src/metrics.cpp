#include "segrefine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "segrefine/distance.hpp"

namespace segrefine {

namespace {

void require_binary_pair(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("metric inputs must share a shape");
  if (!is_binary_mask(pred) || !is_binary_mask(gt)) {
    throw std::invalid_argument("metric inputs must be single-channel binary masks");
  }
}

}  // namespace

RadiiSchedule radii_schedule(int width, int height) {
  const double top = std::max(3.0, (static_cast<double>(width) + height) / 300.0);
  RadiiSchedule r{};
  for (int k = 0; k < 5; ++k) r[k] = 3.0 + k * (top - 3.0) / 4.0;
  return r;
}

double BoundaryDistanceMap::distance(int row, int col) const {
  return std::sqrt(static_cast<double>(squared[static_cast<std::size_t>(row) * width + col]));
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
  require_binary_pair(pred, gt);
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0.0f;
    const bool b = g[i] != 0.0f;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<unsigned char> boundary_pixels(const BinaryMask& gt) {
  const int h = gt.height();
  const int w = gt.width();
  std::vector<unsigned char> out(static_cast<std::size_t>(h) * w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float v = gt.at(r, c);
      const bool edge = (r > 0 && gt.at(r - 1, c) != v) || (r + 1 < h && gt.at(r + 1, c) != v) ||
                        (c > 0 && gt.at(r, c - 1) != v) || (c + 1 < w && gt.at(r, c + 1) != v);
      out[static_cast<std::size_t>(r) * w + c] = edge;
    }
  }
  return out;
}

BoundaryDistanceMap boundary_distance_map(const BinaryMask& gt) {
  if (!is_binary_mask(gt)) throw std::invalid_argument("boundary_distance_map expects a binary mask");
  const auto edge = boundary_pixels(gt);
  if (std::find(edge.begin(), edge.end(), 1) == edge.end()) {
    throw UndefinedMetricError("ground truth holds a single class; boundary undefined");
  }
  return {gt.height(), gt.width(), squared_distance_to(edge, gt.height(), gt.width())};
}

double mba(const BinaryMask& pred, const BinaryMask& gt) {
  require_binary_pair(pred, gt);
  const auto dist = boundary_distance_map(gt);
  const auto radii = radii_schedule(gt.width(), gt.height());
  const auto p = pred.values();
  const auto g = gt.values();
  std::vector<double> distance(dist.squared.size());
  for (std::size_t i = 0; i < distance.size(); ++i) {
    distance[i] = std::sqrt(static_cast<double>(dist.squared[i]));
  }
  double sum = 0.0;
  for (const double r : radii) {
    std::size_t inside = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (distance[i] <= r) {
        ++inside;
        correct += p[i] == g[i];
      }
    }
    // boundary pixels have distance 0, so `inside` is never zero here
    sum += static_cast<double>(correct) / static_cast<double>(inside);
  }
  return sum / static_cast<double>(radii.size());
}

double EvalReport::mean_iou() const {
  if (images.empty()) return 0.0;
  double s = 0.0;
  for (const auto& i : images) s += i.iou;
  return s / static_cast<double>(images.size());
}

double EvalReport::mean_mba() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& i : images) {
    if (std::isnan(i.mba)) continue;
    s += i.mba;
    ++n;
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

void EvalReport::write_table(std::ostream& os) const {
  std::size_t name_w = 5;
  for (const auto& i : images) name_w = std::max(name_w, i.id.size());
  os << std::left << std::setw(static_cast<int>(name_w)) << "image" << "  " << std::right
     << std::setw(8) << "IoU" << "  " << std::setw(8) << "mBA" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& i : images) {
    os << std::left << std::setw(static_cast<int>(name_w)) << i.id << "  " << std::right
       << std::setw(8) << i.iou << "  " << std::setw(8) << i.mba << '\n';
  }
  os << std::left << std::setw(static_cast<int>(name_w)) << "mean" << "  " << std::right
     << std::setw(8) << mean_iou() << "  " << std::setw(8) << mean_mba() << '\n';
  os.unsetf(std::ios::floatfield);
}

void EvalReport::write_key_values(std::ostream& os) const {
  os << std::setprecision(17);
  for (const auto& i : images) {
    os << "image." << i.id << ".iou=" << i.iou << '\n';
    os << "image." << i.id << ".mba=" << i.mba << '\n';
  }
  os << "mean.iou=" << mean_iou() << '\n';
  os << "mean.mba=" << mean_mba() << '\n';
  os << "count=" << images.size() << '\n';
}

}  // namespace segrefine
