#include "surfblc/isotonic.hpp"

#include <cstddef>

namespace surfblc {

std::vector<double> isotonic_nonincreasing(std::span<const double> y) {
    const std::size_t n = y.size();
    std::vector<double> level(n);   // pooled block mean
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = y[i];
        count[blocks] = 1;
        ++blocks;
        // merge while the non-increasing constraint is violated
        while (blocks > 1 && level[blocks - 2] < level[blocks - 1]) {
            double total = level[blocks - 2] * double(count[blocks - 2]) +
                           level[blocks - 1] * double(count[blocks - 1]);
            count[blocks - 2] += count[blocks - 1];
            level[blocks - 2] = total / double(count[blocks - 2]);
            --blocks;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t b = 0; b < blocks; ++b)
        out.insert(out.end(), count[b], level[b]);
    return out;
}

} // namespace surfblc
