#include "dabc/resample.hpp"

#include <algorithm>
#include <cmath>

namespace dabc {

LinearTaps linear_taps(int in_size, int out_size)
{
    LinearTaps taps;
    taps.lo.resize(out_size);
    taps.hi.resize(out_size);
    taps.frac.resize(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0)
            src = 0.0;
        int lo = static_cast<int>(std::floor(src));
        lo = std::min(lo, in_size - 1);
        const int hi = std::min(lo + 1, in_size - 1);
        taps.lo[o] = lo;
        taps.hi[o] = hi;
        taps.frac[o] = hi == lo ? 0.0 : src - lo;
    }
    return taps;
}

std::vector<int> nearest_taps(int in_size, int out_size)
{
    std::vector<int> idx(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o)
        idx[o] = std::min(static_cast<int>(std::floor((o + 0.5) * scale)), in_size - 1);
    return idx;
}

} // namespace dabc
