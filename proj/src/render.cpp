#include "dabc/render.hpp"

#include "dabc/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace dabc {

namespace {

void save(const cv::Mat& image, const std::string& path)
{
    if (!cv::imwrite(path, image))
        throw Error("cannot write " + path);
}

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                               {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

} // namespace

void write_depth_png(const DepthMap& depth, Domain domain, const std::string& path, double lo, double hi,
                     const ValidMask* mask)
{
    if (!(lo > 0.0) || !(hi > lo))
        throw ParameterError("depth colour range must satisfy 0 < lo < hi");
    const double llo = std::log(lo);
    const double span = std::log(hi) - llo;
    cv::Mat gray(depth.height, depth.width, CV_8UC1);
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            const double d = std::max(depth(y, x), 1e-12);
            double t = std::clamp((std::log(d) - llo) / span, 0.0, 1.0);
            // viridis runs purple -> yellow, so near must map to the top end outdoors
            if (domain == Domain::outdoor)
                t = 1.0 - t;
            gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(t * 255.0));
        }
    cv::Mat color;
    cv::applyColorMap(gray, color, domain == Domain::outdoor ? cv::COLORMAP_VIRIDIS : cv::COLORMAP_JET);
    if (mask) {
        if (!mask->same_shape(depth))
            throw ShapeError("mask does not match depth map");
        for (int y = 0; y < depth.height; ++y)
            for (int x = 0; x < depth.width; ++x)
                if (!(*mask)(y, x))
                    color.at<cv::Vec3b>(y, x) = cv::Vec3b(0, 0, 0);
    }
    save(color, path);
}

void write_confusion_png(const ConfusionMatrix& cm, const std::string& path, const std::string& title)
{
    const int n = cm.size();
    if (n == 0)
        throw ParameterError("empty confusion matrix");
    const int cell = std::max(2, 600 / n);
    const int margin = 40;
    const int side = n * cell;
    const std::vector<double> norm = cm.normalized();

    cv::Mat gray(side, side, CV_8UC1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(norm[i * n + j], 0.0, 1.0) * 255.0));
            gray(cv::Rect(j * cell, i * cell, cell, cell)).setTo(v);
        }
    cv::Mat heat;
    cv::applyColorMap(gray, heat, cv::COLORMAP_VIRIDIS);

    cv::Mat canvas(side + 2 * margin, side + 2 * margin, CV_8UC3, cv::Scalar(255, 255, 255));
    heat.copyTo(canvas(cv::Rect(margin, margin, side, side)));
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    cv::putText(canvas, title, {margin, 25}, font, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
    const int first = cm.offset();
    const int last = cm.offset() + n - 1;
    cv::putText(canvas, std::to_string(first), {margin - 30, margin + 12}, font, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
    cv::putText(canvas, std::to_string(last), {margin - 30, margin + side}, font, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
    cv::putText(canvas, std::to_string(last), {margin + side - 20, margin + side + 18}, font, 0.4, {0, 0, 0}, 1,
                cv::LINE_AA);
    cv::putText(canvas, "predicted label", {margin + side / 2 - 50, margin + side + 32}, font, 0.4, {0, 0, 0}, 1,
                cv::LINE_AA);
    save(canvas, path);
}

void write_line_plot_png(const std::vector<PlotSeries>& series, const std::string& path, const std::string& title,
                         double y_lo, double y_hi)
{
    if (!(y_hi > y_lo))
        throw ParameterError("plot y range must be increasing");
    const int width = 640;
    const int height = 360;
    const int left = 50;
    const int right = 140;
    const int top = 35;
    const int bottom = 35;
    const int pw = width - left - right;
    const int ph = height - top - bottom;
    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    cv::rectangle(canvas, {left, top}, {left + pw, top + ph}, {0, 0, 0}, 1);
    cv::putText(canvas, title, {left, 22}, font, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
    for (int k = 0; k <= 4; ++k) {
        const double v = y_lo + (y_hi - y_lo) * k / 4.0;
        const int y = top + ph - static_cast<int>(std::lround(ph * k / 4.0));
        cv::line(canvas, {left - 4, y}, {left, y}, {0, 0, 0}, 1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        cv::putText(canvas, buf, {4, y + 4}, font, 0.35, {0, 0, 0}, 1, cv::LINE_AA);
    }
    cv::putText(canvas, "channel", {left + pw / 2 - 25, height - 10}, font, 0.4, {0, 0, 0}, 1, cv::LINE_AA);

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& values = series[s].values;
        const cv::Scalar color = kPalette[s % std::size(kPalette)];
        const std::size_t n = values.size();
        auto point = [&](std::size_t i) {
            const double fx = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
            const double fy = std::clamp((values[i] - y_lo) / (y_hi - y_lo), 0.0, 1.0);
            return cv::Point(left + static_cast<int>(std::lround(fx * pw)),
                             top + ph - static_cast<int>(std::lround(fy * ph)));
        };
        for (std::size_t i = 1; i < n; ++i)
            cv::line(canvas, point(i - 1), point(i), color, 1, cv::LINE_AA);
        if (n == 1)
            cv::circle(canvas, point(0), 2, color, -1);
        const int ly = top + 12 + 18 * static_cast<int>(s);
        cv::line(canvas, {left + pw + 10, ly - 4}, {left + pw + 30, ly - 4}, color, 2);
        cv::putText(canvas, series[s].label, {left + pw + 35, ly}, font, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
    }
    save(canvas, path);
}

} // namespace dabc
