#pragma once

#include <vector>

namespace dabc {

/// Source taps of a 1-D bilinear resize with half-pixel centers (align_corners = false).
/// Output index o reads (1 - frac[o]) * in[lo[o]] + frac[o] * in[hi[o]].
struct LinearTaps
{
    std::vector<int> lo;
    std::vector<int> hi;
    std::vector<double> frac;
};

LinearTaps linear_taps(int in_size, int out_size);

/// Nearest-neighbour source index for each output index, half-pixel centers.
std::vector<int> nearest_taps(int in_size, int out_size);

} // namespace dabc
