#pragma once

#include "dabc/random.hpp"
#include "dabc/scene.hpp"

#include <nlohmann/json.hpp>

#include <utility>

namespace dabc {

/// Network input size and the per-domain resize targets applied before cropping and padding.
/// The full-scale preset feeds 256x320: indoor frames go to 240x320 and are padded, outdoor
/// frames go to 182x612, are cropped to 320 columns and padded.
struct TrainGeometry
{
    int net_height = 96;
    int net_width = 128;
    int indoor_height = 90;
    int indoor_width = 128;
    int outdoor_height = 68;
    int outdoor_width = 245;
    double min_scale = 0.9;
    double max_scale = 1.1;

    static TrainGeometry toy();
    static TrainGeometry full_scale();

    /// Throws ParameterError if the network size is not a multiple of 32, if a resize target
    /// is taller than the network input, or if the scale range is invalid.
    void validate() const;

    std::pair<int, int> resize_target(Domain domain) const;
    /// Size at which synthetic frames are generated: twice the resize target, so that the
    /// half-resolution step of tiled inference lands on the training resolution.
    std::pair<int, int> native_size(Domain domain) const;
};

void to_json(nlohmann::json& j, const TrainGeometry& g);
void from_json(const nlohmann::json& j, TrainGeometry& g);

/// Random choices of one augmentation. Crop positions are fractions in [0, 1) of the free range.
struct Augmentation
{
    double scale = 1.0;
    bool flip = false;
    double crop_x = 0.0;
    double crop_y = 0.0;
};

Augmentation sample_augmentation(const TrainGeometry& geometry, Rng& rng);

/// A network-ready example: image, depth and mask at the network input size. Padded pixels
/// are zero in RGB and invalid in the mask.
struct TrainExample
{
    RgbImage rgb;
    DepthMap depth;
    ValidMask valid;
    Domain domain = Domain::indoor;
};

/// Resize to the domain target scaled by `aug.scale` (bilinear RGB, nearest depth and mask),
/// divide depth by the scale, optionally flip, crop to the network size and zero-pad
/// bottom/right. Every geometric step is applied identically to RGB, depth and mask.
TrainExample preprocess_train(const SceneSample& sample, const TrainGeometry& geometry, const Augmentation& aug);

/// Same with augmentation drawn from `rng`.
TrainExample preprocess_train(const SceneSample& sample, const TrainGeometry& geometry, Rng& rng);

} // namespace dabc
