#include "dabc/image_io.hpp"

#include "dabc/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dabc {

void write_pfm(const Grid<float>& image, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot write " + path);
    out << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
    for (int y = image.height - 1; y >= 0; --y) {
        for (int x = 0; x < image.width; ++x) {
            const std::uint32_t bits = std::bit_cast<std::uint32_t>(image(y, x));
            const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                   static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
            out.write(bytes, 4);
        }
    }
    if (!out)
        throw IngestionError("failed writing " + path);
}

void write_pfm(const DepthMap& depth, const std::string& path)
{
    Grid<float> image(depth.height, depth.width);
    for (std::size_t k = 0; k < depth.size(); ++k)
        image.data[k] = static_cast<float>(depth.data[k]);
    write_pfm(image, path);
}

Grid<float> read_pfm(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open " + path);
    std::string magic;
    int width = 0;
    int height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    if (!in || magic != "Pf")
        throw IngestionError(path + ": not a single-channel PFM file");
    if (width <= 0 || height <= 0 || scale == 0.0)
        throw IngestionError(path + ": invalid PFM header");
    in.get(); // single whitespace byte after the scale
    const bool little = scale < 0.0;
    Grid<float> image(height, width);
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            unsigned char b[4];
            if (!in.read(reinterpret_cast<char*>(b), 4))
                throw IngestionError(path + ": truncated PFM data");
            const std::uint32_t bits = little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
                                                 std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24)
                                              : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 |
                                                 std::uint32_t{b[1]} << 16 | std::uint32_t{b[0]} << 24);
            image(y, x) = std::bit_cast<float>(bits);
        }
    }
    return image;
}

void write_png(const RgbImage& image, const std::string& path)
{
    cv::Mat bgr(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
                row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path, bgr);
    } catch (const cv::Exception&) {
        ok = false;
    }
    if (!ok)
        throw IngestionError("cannot write " + path);
}

RgbImage read_png(const std::string& path)
{
    cv::Mat raw;
    try {
        raw = cv::imread(path, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        raw = cv::Mat();
    }
    if (raw.empty())
        throw IngestionError("cannot decode image " + path);
    cv::Mat bgr;
    switch (raw.channels()) {
    case 1:
        cv::cvtColor(raw, bgr, cv::COLOR_GRAY2BGR);
        break;
    case 3:
        bgr = raw;
        break;
    case 4:
        cv::cvtColor(raw, bgr, cv::COLOR_BGRA2BGR);
        break;
    default:
        throw IngestionError(path + ": unsupported channel count");
    }
    const double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
    cv::Mat f;
    bgr.convertTo(f, CV_32FC3, scale);
    RgbImage image(f.rows, f.cols);
    for (int y = 0; y < f.rows; ++y) {
        const auto* row = f.ptr<cv::Vec3f>(y);
        for (int x = 0; x < f.cols; ++x)
            for (int c = 0; c < 3; ++c)
                image.at(c, y, x) = row[x][2 - c];
    }
    return image;
}

} // namespace dabc
