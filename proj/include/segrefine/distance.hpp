#pragma once

#include <limits>
#include <span>
#include <vector>

namespace segrefine {

/// Marker for "no site reachable" in squared distance maps.
inline constexpr long long kNoSite = std::numeric_limits<long long>::max() / 4;

/// Exact squared Euclidean distance from every pixel of an h x w grid to the
/// nearest pixel with sites[i] != 0 (row-major). All entries are kNoSite when
/// there are no sites.
std::vector<long long> squared_distance_to(std::span<const unsigned char> sites, int height,
                                           int width);

}  // namespace segrefine
