#pragma once

#include "dabc/grid.hpp"

#include <string>

namespace dabc {

/// Single-channel PFM ("Pf"), written little-endian (scale -1.0), rows stored bottom-up.
void write_pfm(const Grid<float>& image, const std::string& path);
void write_pfm(const DepthMap& depth, const std::string& path);
/// Reads either endianness. Throws IngestionError naming the file on malformed input.
Grid<float> read_pfm(const std::string& path);

/// 8-bit RGB PNG.
void write_png(const RgbImage& image, const std::string& path);
/// Accepts gray, RGB or RGBA 8/16-bit PNGs; values are scaled into [0, 1].
RgbImage read_png(const std::string& path);

} // namespace dabc
