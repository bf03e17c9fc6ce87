#include "dabc/image_ops.hpp"

#include "dabc/errors.hpp"
#include "dabc/resample.hpp"

namespace dabc {

namespace {

void check_target(int height, int width)
{
    if (height <= 0 || width <= 0)
        throw ShapeError("resize target must be positive");
}

template <typename T>
void bilinear_plane(const T* src, int in_h, int in_w, T* dst, int out_h, int out_w, const LinearTaps& ty,
                    const LinearTaps& tx)
{
    for (int y = 0; y < out_h; ++y) {
        const T* r0 = src + static_cast<std::size_t>(ty.lo[y]) * in_w;
        const T* r1 = src + static_cast<std::size_t>(ty.hi[y]) * in_w;
        const double fy = ty.frac[y];
        for (int x = 0; x < out_w; ++x) {
            const double fx = tx.frac[x];
            const double top = r0[tx.lo[x]] + fx * (static_cast<double>(r0[tx.hi[x]]) - r0[tx.lo[x]]);
            const double bottom = r1[tx.lo[x]] + fx * (static_cast<double>(r1[tx.hi[x]]) - r1[tx.lo[x]]);
            dst[static_cast<std::size_t>(y) * out_w + x] = static_cast<T>(top + fy * (bottom - top));
        }
    }
    (void)in_h;
}

} // namespace

RgbImage resize_bilinear(const RgbImage& image, int height, int width)
{
    check_target(height, width);
    const LinearTaps ty = linear_taps(image.height, height);
    const LinearTaps tx = linear_taps(image.width, width);
    RgbImage out(height, width);
    const std::size_t in_plane = static_cast<std::size_t>(image.height) * image.width;
    const std::size_t out_plane = static_cast<std::size_t>(height) * width;
    for (int c = 0; c < 3; ++c)
        bilinear_plane(image.data.data() + c * in_plane, image.height, image.width, out.data.data() + c * out_plane,
                       height, width, ty, tx);
    return out;
}

DepthMap resize_bilinear(const DepthMap& depth, int height, int width)
{
    check_target(height, width);
    DepthMap out(height, width);
    bilinear_plane(depth.data.data(), depth.height, depth.width, out.data.data(), height, width,
                   linear_taps(depth.height, height), linear_taps(depth.width, width));
    return out;
}

template <typename T>
Grid<T> resize_nearest(const Grid<T>& grid, int height, int width)
{
    check_target(height, width);
    const auto ty = nearest_taps(grid.height, height);
    const auto tx = nearest_taps(grid.width, width);
    Grid<T> out(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out(y, x) = grid(ty[y], tx[x]);
    return out;
}

RgbImage flip_horizontal(const RgbImage& image)
{
    RgbImage out(image.height, image.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
    return out;
}

template <typename T>
Grid<T> flip_horizontal(const Grid<T>& grid)
{
    Grid<T> out(grid.height, grid.width);
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x)
            out(y, x) = grid(y, grid.width - 1 - x);
    return out;
}

RgbImage crop(const RgbImage& image, int y0, int x0, int height, int width, float fill)
{
    RgbImage out(height, width, fill);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < height; ++y) {
            const int sy = y0 + y;
            if (sy < 0 || sy >= image.height)
                continue;
            for (int x = 0; x < width; ++x) {
                const int sx = x0 + x;
                if (sx >= 0 && sx < image.width)
                    out.at(c, y, x) = image.at(c, sy, sx);
            }
        }
    return out;
}

template <typename T>
Grid<T> crop(const Grid<T>& grid, int y0, int x0, int height, int width, T fill)
{
    Grid<T> out(height, width, fill);
    for (int y = 0; y < height; ++y) {
        const int sy = y0 + y;
        if (sy < 0 || sy >= grid.height)
            continue;
        for (int x = 0; x < width; ++x) {
            const int sx = x0 + x;
            if (sx >= 0 && sx < grid.width)
                out(y, x) = grid(sy, sx);
        }
    }
    return out;
}

template Grid<double> resize_nearest<double>(const Grid<double>&, int, int);
template Grid<float> resize_nearest<float>(const Grid<float>&, int, int);
template Grid<std::uint8_t> resize_nearest<std::uint8_t>(const Grid<std::uint8_t>&, int, int);
template Grid<int> resize_nearest<int>(const Grid<int>&, int, int);
template Grid<double> flip_horizontal<double>(const Grid<double>&);
template Grid<std::uint8_t> flip_horizontal<std::uint8_t>(const Grid<std::uint8_t>&);
template Grid<int> flip_horizontal<int>(const Grid<int>&);
template Grid<double> crop<double>(const Grid<double>&, int, int, int, int, double);
template Grid<std::uint8_t> crop<std::uint8_t>(const Grid<std::uint8_t>&, int, int, int, int, std::uint8_t);
template Grid<int> crop<int>(const Grid<int>&, int, int, int, int, int);

} // namespace dabc
