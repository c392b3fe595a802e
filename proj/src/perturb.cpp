#include "segrefine/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "segrefine/distance.hpp"

namespace segrefine {

namespace {

// clockwise with rows growing downwards: E, SE, S, SW, W, NW, N, NE
constexpr std::array<std::array<int, 2>, 8> kRing{{{0, 1}, {1, 1}, {1, 0}, {1, -1},
                                                   {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};

int ring_index(int dr, int dc) {
  for (int i = 0; i < 8; ++i) {
    if (kRing[i][0] == dr && kRing[i][1] == dc) return i;
  }
  throw std::logic_error("offset is not an 8-neighbour");
}

Contour trace_one(const std::vector<int>& labels, int label, int h, int w, int start_r,
                  int start_c) {
  auto inside = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < h && c < w && labels[static_cast<std::size_t>(r) * w + c] == label;
  };
  Contour contour{{start_r, start_c}};
  int cur_r = start_r;
  int cur_c = start_c;
  int back = 4;  // raster-order start: its west neighbour is outside
  std::array<int, 2> first_move{-1, -1};
  const std::size_t limit = 4 * labels.size() + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (inside(cur_r + kRing[d][0], cur_c + kRing[d][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) return contour;  // isolated pixel
    const int next_r = cur_r + kRing[found][0];
    const int next_c = cur_c + kRing[found][1];
    if (cur_r == start_r && cur_c == start_c) {
      if (first_move[0] < 0) {
        first_move = {next_r, next_c};
      } else if (first_move == std::array<int, 2>{next_r, next_c}) {
        contour.pop_back();  // start pixel was appended again on arrival
        return contour;
      }
    }
    const int prev = (found + 7) % 8;
    back = ring_index(cur_r + kRing[prev][0] - next_r, cur_c + kRing[prev][1] - next_c);
    cur_r = next_r;
    cur_c = next_c;
    contour.push_back({cur_r, cur_c});
  }
  return contour;
}

void draw_line(BinaryMask& m, std::array<int, 2> a, std::array<int, 2> b) {
  int r0 = a[0], c0 = a[1];
  const int r1 = b[0], c1 = b[1];
  const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
  const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
  int err = dc - dr;
  while (true) {
    if (r0 >= 0 && c0 >= 0 && r0 < m.height() && c0 < m.width()) m.at(r0, c0) = 1.0f;
    if (r0 == r1 && c0 == c1) break;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c0 += sc;
    }
    if (e2 < dc) {
      err += dc;
      r0 += sr;
    }
  }
}

std::vector<unsigned char> sites_of(const BinaryMask& m, bool foreground) {
  std::vector<unsigned char> s(m.size());
  const auto v = m.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (v[i] != 0.0f) == foreground;
  return s;
}

}  // namespace

void PerturbParams::validate() const {
  if (!(keep_min > 0.0 && keep_min <= keep_max && keep_max <= 1.0)) {
    throw std::invalid_argument("contour keep fractions must satisfy 0 < min <= max <= 1");
  }
  if (ops_min < 0 || ops_max < ops_min) throw std::invalid_argument("invalid morphology op count range");
  if (!(radius_min >= 1.0 && radius_max >= radius_min)) {
    throw std::invalid_argument("morphology radii must satisfy 1 <= min <= max");
  }
  if (reference_size < 1) throw std::invalid_argument("reference_size must be >= 1");
}

std::vector<int> label_components_8(const BinaryMask& mask, int& count) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<int> labels(static_cast<std::size_t>(h) * w, 0);
  count = 0;
  std::vector<std::array<int, 2>> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (mask.at(r, c) == 0.0f || labels[i] != 0) continue;
      ++count;
      labels[i] = count;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const auto [pr, pc] = stack.back();
        stack.pop_back();
        for (const auto& d : kRing) {
          const int nr = pr + d[0], nc = pc + d[1];
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          const std::size_t j = static_cast<std::size_t>(nr) * w + nc;
          if (mask.at(nr, nc) != 0.0f && labels[j] == 0) {
            labels[j] = count;
            stack.push_back({nr, nc});
          }
        }
      }
    }
  }
  return labels;
}

std::vector<Contour> trace_contours(const BinaryMask& mask) {
  int count = 0;
  const auto labels = label_components_8(mask, count);
  const int h = mask.height();
  const int w = mask.width();
  std::vector<Contour> contours;
  std::vector<bool> seen(static_cast<std::size_t>(count) + 1, false);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int label = labels[static_cast<std::size_t>(r) * w + c];
      if (label == 0 || seen[label]) continue;
      seen[label] = true;
      contours.push_back(trace_one(labels, label, h, w, r, c));
    }
  }
  return contours;
}

BinaryMask fill_polygon(const Contour& polygon, int height, int width) {
  BinaryMask out(height, width, 1);
  const std::size_t n = polygon.size();
  if (n == 0) return out;
  std::vector<double> xs;
  for (int r = 0; r < height; ++r) {
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = polygon[i];
      const auto& b = polygon[(i + 1) % n];
      // half-open rule so shared vertices are counted once
      if ((a[0] <= r && r < b[0]) || (b[0] <= r && r < a[0])) {
        xs.push_back(a[1] + static_cast<double>(r - a[0]) * (b[1] - a[1]) / (b[0] - a[0]));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
      const int c1 = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1])));
      for (int c = c0; c <= c1; ++c) out.at(r, c) = 1.0f;
    }
  }
  for (std::size_t i = 0; i < n; ++i) draw_line(out, polygon[i], polygon[(i + 1) % n]);
  return out;
}

BinaryMask dilate_disk(const BinaryMask& mask, double radius) {
  const auto d2 = squared_distance_to(sites_of(mask, true), mask.height(), mask.width());
  const double r2 = radius * radius;
  BinaryMask out(mask.height(), mask.width(), 1);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(d2[i]) <= r2 ? 1.0f : 0.0f;
  return out;
}

BinaryMask erode_disk(const BinaryMask& mask, double radius) {
  const auto d2 = squared_distance_to(sites_of(mask, false), mask.height(), mask.width());
  const double r2 = radius * radius;
  BinaryMask out(mask.height(), mask.width(), 1);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(d2[i]) > r2 ? 1.0f : 0.0f;
  return out;
}

BinaryMask perturb_mask(const BinaryMask& gt, const PerturbParams& params, std::mt19937_64& rng) {
  params.validate();
  if (!is_binary_mask(gt)) throw std::invalid_argument("perturb_mask expects a binary mask");
  const int h = gt.height();
  const int w = gt.width();
  BinaryMask out(h, w, 1);
  const auto contours = trace_contours(gt);
  if (contours.empty()) return out;

  std::uniform_real_distribution<double> keep_dist(params.keep_min, params.keep_max);
  for (const auto& contour : contours) {
    Contour kept;
    const double keep = keep_dist(rng);
    const std::size_t target =
        std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(keep * contour.size())));
    if (contour.size() <= target) {
      kept = contour;
    } else {
      std::sample(contour.begin(), contour.end(), std::back_inserter(kept), target, rng);
    }
    const auto filled = fill_polygon(kept, h, w);
    auto ov = out.values();
    const auto fv = filled.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::max(ov[i], fv[i]);
  }

  const double scale = static_cast<double>(std::max(h, w)) / params.reference_size;
  std::uniform_int_distribution<int> ops_dist(params.ops_min, params.ops_max);
  std::uniform_real_distribution<double> radius_dist(params.radius_min, params.radius_max);
  std::bernoulli_distribution grow(0.5);
  const int ops = ops_dist(rng);
  for (int i = 0; i < ops; ++i) {
    const bool dilate = grow(rng);
    const double radius = radius_dist(rng) * scale;
    out = dilate ? dilate_disk(out, radius) : erode_disk(out, radius);
  }
  if (out == gt) out = dilate_disk(out, params.radius_min * scale);
  return out;
}

std::mt19937_64 split_rng(std::uint64_t root_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace segrefine
