#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dabc {

/// Dense row-major 2-D array.
template <typename T>
struct Grid
{
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(int h, int w) const { return height == h && width == w; }
    template <typename U>
    bool same_shape(const Grid<U>& other) const { return height == other.height && width == other.width; }

    bool operator==(const Grid&) const = default;
};

/// Per-pixel metric depth in meters.
using DepthMap = Grid<double>;

/// Per-pixel validity flag (nonzero = valid).
using ValidMask = Grid<std::uint8_t>;

/// Planar RGB image with values in [0, 1], stored channel-major.
struct RgbImage
{
    int height = 0;
    int width = 0;
    std::vector<float> data;

    RgbImage() = default;
    RgbImage(int h, int w, float fill = 0.0f) : height(h), width(w), data(3 * static_cast<std::size_t>(h) * w, fill) {}

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    float luminance(int y, int x) const { return 0.299f * at(0, y, x) + 0.587f * at(1, y, x) + 0.114f * at(2, y, x); }

    bool operator==(const RgbImage&) const = default;
};

inline std::size_t count_valid(const ValidMask& mask)
{
    std::size_t n = 0;
    for (auto v : mask.data)
        n += v != 0;
    return n;
}

} // namespace dabc
