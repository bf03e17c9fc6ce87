#include "dabc/inference.hpp"

#include "dabc/errors.hpp"
#include "dabc/image_ops.hpp"

#include <cmath>

namespace dabc {

int TilePlan::coverage(int x) const
{
    int n = 0;
    for (const auto& [x0, x1] : tiles)
        n += x >= x0 && x < x1;
    return n;
}

TilePlan plan_tiles(int height, int width, int tile_width, int net_height, int net_width)
{
    if (height <= 0 || width <= 0 || tile_width <= 0)
        throw ParameterError("image and tile sizes must be positive");
    if (tile_width > net_width)
        throw ParameterError("tile width " + std::to_string(tile_width) + " exceeds network input width " +
                             std::to_string(net_width));
    TilePlan plan;
    plan.height = height;
    plan.width = width;
    plan.down_height = (height + 1) / 2;
    plan.down_width = (width + 1) / 2;
    plan.net_height = net_height;
    plan.net_width = net_width;
    plan.tile_width = tile_width;
    if (plan.down_height > net_height)
        throw ParameterError("downsampled height " + std::to_string(plan.down_height) +
                             " exceeds network input height " + std::to_string(net_height));

    const int w = plan.down_width;
    if (w <= tile_width) {
        plan.tiles.push_back({0, w});
    } else {
        const int count = std::max(2, (w + tile_width - 1) / tile_width);
        const int span = w - tile_width;
        for (int i = 0; i < count; ++i) {
            const int x0 = static_cast<int>(std::lround(static_cast<double>(span) * i / (count - 1)));
            plan.tiles.push_back({x0, x0 + tile_width});
        }
    }
    int total = 0;
    for (const auto& [x0, x1] : plan.tiles)
        total += x1 - x0;
    plan.overlap = total - w;
    return plan;
}

Tensor<float> make_input(const std::vector<const RgbImage*>& images)
{
    if (images.empty())
        throw EmptyBatchError("no images");
    const int h = images.front()->height;
    const int w = images.front()->width;
    Tensor<float> x(static_cast<int>(images.size()), 3, h, w);
    for (std::size_t n = 0; n < images.size(); ++n) {
        const RgbImage& img = *images[n];
        if (img.height != h || img.width != w)
            throw ShapeError("batch images differ in size");
        float* dst = x.sample(static_cast<int>(n));
        for (std::size_t k = 0; k < img.data.size(); ++k)
            dst[k] = img.data[k] - 0.5f;
    }
    return x;
}

template <typename T>
DepthMap decode_depth(const Tensor<T>& scores, int n, HeadKind head, const QuantizationSpec& spec)
{
    const Shape& s = scores.shape();
    DepthMap out(s.h, s.w);
    const T* base = scores.sample(n);
    if (head == HeadKind::classification) {
        if (s.c != spec.num_classes())
            throw ShapeError("score volume has " + std::to_string(s.c) + " channels, expected " +
                             std::to_string(spec.num_classes()));
        for (std::size_t i = 0; i < s.plane(); ++i)
            out.data[i] = soft_weighted_depth_unchecked(base + i, s.plane(), spec);
    } else {
        if (s.c != 1)
            throw ShapeError("regression output must have one channel");
        const double lo = spec.bin_weights().front();
        const double hi = spec.bin_weights().back();
        for (std::size_t i = 0; i < s.plane(); ++i)
            out.data[i] = std::pow(10.0, std::clamp(static_cast<double>(base[i]), lo, hi));
    }
    return out;
}

template <typename T>
DepthMap decode_depth_hard_max(const Tensor<T>& scores, int n, const QuantizationSpec& spec)
{
    const Shape& s = scores.shape();
    if (s.c != spec.num_classes())
        throw ShapeError("score volume does not match the quantization");
    DepthMap out(s.h, s.w);
    const T* base = scores.sample(n);
    for (std::size_t i = 0; i < s.plane(); ++i) {
        int best = 0;
        for (int c = 1; c < s.c; ++c)
            if (base[c * s.plane() + i] > base[best * s.plane() + i])
                best = c;
        out.data[i] = label_to_depth(best, spec);
    }
    return out;
}

DepthMap stitch_tiles(const std::vector<DepthMap>& tiles, const TilePlan& plan)
{
    if (tiles.size() != plan.tiles.size())
        throw ShapeError("tile prediction count does not match the plan");
    DepthMap sum(plan.down_height, plan.down_width);
    Grid<int> count(plan.down_height, plan.down_width);
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const auto [x0, x1] = plan.tiles[t];
        if (!tiles[t].same_shape(plan.down_height, x1 - x0))
            throw ShapeError("tile prediction has the wrong size");
        for (int y = 0; y < plan.down_height; ++y)
            for (int x = x0; x < x1; ++x) {
                sum(y, x) += tiles[t](y, x - x0);
                ++count(y, x);
            }
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
        if (count.data[k] == 0)
            throw ShapeError("tile plan leaves a column uncovered");
        if (count.data[k] > 1)
            sum.data[k] /= count.data[k];
    }
    return sum;
}

Predictor::Predictor(Model<float>& model, const QuantizationSpec& spec, int net_height, int net_width,
                     int tile_width)
    : model_(model), spec_(spec), net_height_(net_height), net_width_(net_width), tile_width_(tile_width)
{
    check_input_geometry(Shape{1, 3, net_height, net_width});
    model.config().validate(spec);
    if (tile_width <= 0 || tile_width > net_width)
        throw ParameterError("tile width must be in [1, network width]");
}

TilePlan Predictor::plan(int height, int width) const
{
    return plan_tiles(height, width, tile_width_, net_height_, net_width_);
}

DepthMap Predictor::predict_window(const RgbImage& window, std::vector<AttentionRecord>* attention)
{
    if (window.height > net_height_ || window.width > net_width_)
        throw ShapeError("window larger than the network input");
    const RgbImage canvas = crop(window, 0, 0, net_height_, net_width_, 0.0f);
    ForwardOutput<float> out = model_.forward(make_input({&canvas}), Mode::eval);
    if (attention)
        *attention = std::move(out.attention);
    const DepthMap coarse = decode_depth(out.scores, 0, model_.config().head, spec_);
    const DepthMap full = resize_bilinear(coarse, net_height_, net_width_);
    return crop(full, 0, 0, window.height, window.width);
}

DepthMap Predictor::direct(const RgbImage& image)
{
    const TilePlan p = plan(image.height, image.width);
    const RgbImage down = resize_bilinear(image, p.down_height, p.down_width);
    const DepthMap depth = predict_window(down);
    return resize_bilinear(depth, image.height, image.width);
}

DepthMap Predictor::tiled(const RgbImage& image, std::vector<DepthMap>* tile_predictions)
{
    const TilePlan p = plan(image.height, image.width);
    const RgbImage down = resize_bilinear(image, p.down_height, p.down_width);
    std::vector<DepthMap> tiles;
    for (const auto& [x0, x1] : p.tiles)
        tiles.push_back(predict_window(crop(down, 0, x0, p.down_height, x1 - x0)));
    const DepthMap stitched = stitch_tiles(tiles, p);
    if (tile_predictions)
        *tile_predictions = std::move(tiles);
    return resize_bilinear(stitched, image.height, image.width);
}

template DepthMap decode_depth<float>(const Tensor<float>&, int, HeadKind, const QuantizationSpec&);
template DepthMap decode_depth<double>(const Tensor<double>&, int, HeadKind, const QuantizationSpec&);
template DepthMap decode_depth_hard_max<float>(const Tensor<float>&, int, const QuantizationSpec&);
template DepthMap decode_depth_hard_max<double>(const Tensor<double>&, int, const QuantizationSpec&);

} // namespace dabc
