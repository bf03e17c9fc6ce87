#pragma once

#include "dabc/grid.hpp"

#include <string>

namespace dabc {

enum class Domain { indoor, outdoor };

std::string to_string(Domain domain);
/// Throws ParameterError for anything but "indoor" / "outdoor".
Domain domain_from_string(const std::string& text);

/// One RGB-D example with its validity mask.
struct SceneSample
{
    std::string id;
    Domain domain = Domain::indoor;
    RgbImage rgb;
    DepthMap depth;
    ValidMask valid;

    int height() const { return rgb.height; }
    int width() const { return rgb.width; }
    bool operator==(const SceneSample&) const = default;
};

/// Throws ShapeError on inconsistent shapes and DomainError on a non-positive valid depth.
void check_sample(const SceneSample& sample);

} // namespace dabc
