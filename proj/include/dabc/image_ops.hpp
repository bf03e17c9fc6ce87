#pragma once

#include "dabc/grid.hpp"

namespace dabc {

/// Half-pixel-centred bilinear resize of every channel.
RgbImage resize_bilinear(const RgbImage& image, int height, int width);
DepthMap resize_bilinear(const DepthMap& depth, int height, int width);

/// Nearest-neighbour resize (half-pixel centres), for depth and mask labels.
template <typename T>
Grid<T> resize_nearest(const Grid<T>& grid, int height, int width);

RgbImage flip_horizontal(const RgbImage& image);
template <typename T>
Grid<T> flip_horizontal(const Grid<T>& grid);

/// Copies the window [y0, y0 + height) x [x0, x0 + width); parts outside the source are `fill`.
RgbImage crop(const RgbImage& image, int y0, int x0, int height, int width, float fill = 0.0f);
template <typename T>
Grid<T> crop(const Grid<T>& grid, int y0, int x0, int height, int width, T fill = T{});

} // namespace dabc
