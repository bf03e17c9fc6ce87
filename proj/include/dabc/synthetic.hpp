#pragma once

#include "dabc/scene.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace dabc {

/// Constructive depth bounds of the procedural scenes.
inline constexpr double kIndoorMinDepth = 0.4;
inline constexpr double kIndoorMaxDepth = 10.0;
inline constexpr double kOutdoorMinDepth = 2.5;
inline constexpr double kOutdoorMaxDepth = 80.0;
/// Upper bound on the valid-pixel fraction of sparse outdoor samples.
inline constexpr double kSparseValidFraction = 0.05;

/// Procedural room: floor, ceiling, side and back walls plus 1-4 boxes, seen through a
/// pinhole camera with random height, yaw and pitch. Every pixel is valid, depth in [0.4, 10].
/// Pure function of (seed, height, width).
SceneSample generate_indoor(std::uint64_t seed, int height, int width);

/// Procedural street: road plane with lane marks, building facades, 0-4 box obstacles and
/// sky. Sky and surfaces outside [2.5, 80] m are invalid. In sparse mode at most 5% of the
/// pixels keep their depth, mimicking a projected LiDAR scan.
SceneSample generate_outdoor(std::uint64_t seed, int height, int width, bool sparse = false);

/// JSON: {count, height, width, seed, domain, sparse}.
struct GeneratorConfig
{
    int count = 1;
    int height = 96;
    int width = 128;
    std::uint64_t seed = 0;
    Domain domain = Domain::indoor;
    bool sparse = false;
};

void to_json(nlohmann::json& j, const GeneratorConfig& cfg);
void from_json(const nlohmann::json& j, GeneratorConfig& cfg);

/// Sample i uses derive_seed(cfg.seed, i); ids are "<domain>_<i>".
std::vector<SceneSample> generate_dataset(const GeneratorConfig& cfg);

} // namespace dabc
