#include "segrefine/distance.hpp"

#include <algorithm>
#include <stdexcept>

namespace segrefine {

namespace {

// 1-D squared distance transform (lower envelope of parabolas). Sites with
// f == kNoSite are absent.
void edt_1d(const std::vector<long long>& f, std::vector<long long>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kNoSite) continue;
    double s = 0.0;
    while (k >= 0) {
      const int p = v[k];
      s = (static_cast<double>(f[q] + 1LL * q * q) - static_cast<double>(f[p] + 1LL * p * p)) /
          (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
    }
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kNoSite);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const long long dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<long long> squared_distance_to(std::span<const unsigned char> sites, int height,
                                           int width) {
  if (sites.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("squared_distance_to: site count does not match extent");
  }
  const int n = std::max(height, width);
  std::vector<long long> f(n), d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  std::vector<long long> out(sites.size());

  // separable: columns first, then rows
  f.resize(height);
  d.resize(height);
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r < height; ++r) f[r] = sites[static_cast<std::size_t>(r) * width + c] ? 0 : kNoSite;
    edt_1d(f, d, v, z);
    for (int r = 0; r < height; ++r) out[static_cast<std::size_t>(r) * width + c] = d[r];
  }
  f.resize(width);
  d.resize(width);
  for (int r = 0; r < height; ++r) {
    std::copy_n(out.begin() + static_cast<std::ptrdiff_t>(r) * width, width, f.begin());
    edt_1d(f, d, v, z);
    std::copy_n(d.begin(), width, out.begin() + static_cast<std::ptrdiff_t>(r) * width);
  }
  return out;
}

}  // namespace segrefine
