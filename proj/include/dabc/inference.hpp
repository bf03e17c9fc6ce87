#pragma once

#include "dabc/model.hpp"
#include "dabc/scene.hpp"

#include <utility>
#include <vector>

namespace dabc {

/// Test-time geometry: the image is halved, split into column slices of at most
/// `tile_width`, and each slice is zero-padded to the network input size.
struct TilePlan
{
    int height = 0;
    int width = 0;
    int down_height = 0;
    int down_width = 0;
    int net_height = 0;
    int net_width = 0;
    int tile_width = 0;
    /// Half-open column ranges in the downsampled image, left to right.
    std::vector<std::pair<int, int>> tiles;
    /// Sum of tile widths minus the downsampled width.
    int overlap = 0;

    /// Number of tiles covering downsampled column x.
    int coverage(int x) const;
};

/// Halves the size (rounding up), then one tile if the width fits, otherwise tiles anchored
/// at both edges (and evenly spaced in between when two do not suffice). Throws
/// ParameterError for non-positive sizes, a tile wider than the network input, or a
/// downsampled height taller than it.
TilePlan plan_tiles(int height, int width, int tile_width, int net_height, int net_width);

/// Network input for a batch of images of equal size: RGB shifted by -0.5.
Tensor<float> make_input(const std::vector<const RgbImage*>& images);

/// Per-pixel decoding of one batch element: soft-weighted sum for classification scores,
/// 10^x (clamped to the quantization range) for regression outputs.
template <typename T>
DepthMap decode_depth(const Tensor<T>& scores, int n, HeadKind head, const QuantizationSpec& spec);

/// Hard-max decoding of a classification score volume, for comparison.
template <typename T>
DepthMap decode_depth_hard_max(const Tensor<T>& scores, int n, const QuantizationSpec& spec);

/// Averages tile predictions (each down_height x tile columns) over their overlap in linear depth.
DepthMap stitch_tiles(const std::vector<DepthMap>& tiles, const TilePlan& plan);

/// Eval-mode inference with a frozen model.
class Predictor
{
public:
    Predictor(Model<float>& model, const QuantizationSpec& spec, int net_height, int net_width, int tile_width);

    /// Pads an image no larger than the network input, runs the model, decodes, upsamples
    /// the output bilinearly to the input size and strips the padding.
    DepthMap predict_window(const RgbImage& window, std::vector<AttentionRecord>* attention = nullptr);

    /// Halve, predict the whole downsampled frame as one window, upsample to the input size.
    /// Only valid when the downsampled frame fits the network input.
    DepthMap direct(const RgbImage& image);

    /// Halve, split into tiles, predict, stitch, upsample to the input size.
    DepthMap tiled(const RgbImage& image, std::vector<DepthMap>* tile_predictions = nullptr);

    TilePlan plan(int height, int width) const;
    Model<float>& model() { return model_; }
    const QuantizationSpec& spec() const { return spec_; }

private:
    Model<float>& model_;
    QuantizationSpec spec_;
    int net_height_;
    int net_width_;
    int tile_width_;
};

} // namespace dabc
