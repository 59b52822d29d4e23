#pragma once

#include <span>
#include <vector>

namespace surfblc {

/// Least-squares projection onto the cone of non-increasing vectors
/// (pool-adjacent-violators).
std::vector<double> isotonic_nonincreasing(std::span<const double> y);

} // namespace surfblc
