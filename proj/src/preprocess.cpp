#include "dabc/preprocess.hpp"

#include "dabc/errors.hpp"
#include "dabc/image_ops.hpp"

#include <cmath>

namespace dabc {

TrainGeometry TrainGeometry::toy()
{
    return TrainGeometry{};
}

TrainGeometry TrainGeometry::full_scale()
{
    TrainGeometry g;
    g.net_height = 256;
    g.net_width = 320;
    g.indoor_height = 240;
    g.indoor_width = 320;
    g.outdoor_height = 182;
    g.outdoor_width = 612;
    return g;
}

void TrainGeometry::validate() const
{
    if (net_height <= 0 || net_width <= 0 || net_height % 32 != 0 || net_width % 32 != 0)
        throw ParameterError("network input size must be a positive multiple of 32");
    if (indoor_height <= 0 || indoor_width <= 0 || outdoor_height <= 0 || outdoor_width <= 0)
        throw ParameterError("resize targets must be positive");
    if (indoor_height > net_height || outdoor_height > net_height)
        throw ParameterError("resize target taller than the network input");
    if (!(min_scale > 0.0) || !(max_scale >= min_scale))
        throw ParameterError("invalid random scale range");
}

std::pair<int, int> TrainGeometry::resize_target(Domain domain) const
{
    return domain == Domain::indoor ? std::pair{indoor_height, indoor_width} : std::pair{outdoor_height, outdoor_width};
}

std::pair<int, int> TrainGeometry::native_size(Domain domain) const
{
    const auto [h, w] = resize_target(domain);
    return {2 * h, 2 * w};
}

void to_json(nlohmann::json& j, const TrainGeometry& g)
{
    j = nlohmann::json{{"net_height", g.net_height},         {"net_width", g.net_width},
                       {"indoor_height", g.indoor_height},   {"indoor_width", g.indoor_width},
                       {"outdoor_height", g.outdoor_height}, {"outdoor_width", g.outdoor_width},
                       {"min_scale", g.min_scale},           {"max_scale", g.max_scale}};
}

void from_json(const nlohmann::json& j, TrainGeometry& g)
{
    TrainGeometry out = j.value("preset", std::string("toy")) == "full" ? TrainGeometry::full_scale()
                                                                        : TrainGeometry::toy();
    out.net_height = j.value("net_height", out.net_height);
    out.net_width = j.value("net_width", out.net_width);
    out.indoor_height = j.value("indoor_height", out.indoor_height);
    out.indoor_width = j.value("indoor_width", out.indoor_width);
    out.outdoor_height = j.value("outdoor_height", out.outdoor_height);
    out.outdoor_width = j.value("outdoor_width", out.outdoor_width);
    out.min_scale = j.value("min_scale", out.min_scale);
    out.max_scale = j.value("max_scale", out.max_scale);
    out.validate();
    g = out;
}

Augmentation sample_augmentation(const TrainGeometry& geometry, Rng& rng)
{
    Augmentation aug;
    aug.scale = rng.uniform(geometry.min_scale, geometry.max_scale);
    aug.flip = rng.bernoulli(0.5);
    aug.crop_x = rng.uniform();
    aug.crop_y = rng.uniform();
    return aug;
}

TrainExample preprocess_train(const SceneSample& sample, const TrainGeometry& geometry, const Augmentation& aug)
{
    geometry.validate();
    check_sample(sample);
    if (!(aug.scale > 0.0))
        throw ParameterError("augmentation scale must be positive");
    const auto [base_h, base_w] = geometry.resize_target(sample.domain);
    const int rh = std::max(1, static_cast<int>(std::lround(base_h * aug.scale)));
    const int rw = std::max(1, static_cast<int>(std::lround(base_w * aug.scale)));

    RgbImage rgb = resize_bilinear(sample.rgb, rh, rw);
    DepthMap depth = resize_nearest(sample.depth, rh, rw);
    ValidMask valid = resize_nearest(sample.valid, rh, rw);
    // zooming in by s makes the scene look 1/s as far away
    for (std::size_t k = 0; k < depth.size(); ++k)
        depth.data[k] = valid.data[k] ? depth.data[k] / aug.scale : 0.0;

    if (aug.flip) {
        rgb = flip_horizontal(rgb);
        depth = flip_horizontal(depth);
        valid = flip_horizontal(valid);
    }

    const int free_x = std::max(0, rw - geometry.net_width);
    const int free_y = std::max(0, rh - geometry.net_height);
    const int x0 = std::min(free_x, static_cast<int>(std::floor(aug.crop_x * (free_x + 1))));
    const int y0 = std::min(free_y, static_cast<int>(std::floor(aug.crop_y * (free_y + 1))));

    TrainExample out;
    out.domain = sample.domain;
    out.rgb = crop(rgb, y0, x0, geometry.net_height, geometry.net_width, 0.0f);
    out.depth = crop(depth, y0, x0, geometry.net_height, geometry.net_width, 0.0);
    out.valid = crop(valid, y0, x0, geometry.net_height, geometry.net_width, std::uint8_t{0});
    return out;
}

TrainExample preprocess_train(const SceneSample& sample, const TrainGeometry& geometry, Rng& rng)
{
    return preprocess_train(sample, geometry, sample_augmentation(geometry, rng));
}

} // namespace dabc
