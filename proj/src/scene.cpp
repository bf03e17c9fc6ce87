#include "dabc/scene.hpp"

#include "dabc/errors.hpp"

#include <cmath>

namespace dabc {

std::string to_string(Domain domain)
{
    return domain == Domain::indoor ? "indoor" : "outdoor";
}

Domain domain_from_string(const std::string& text)
{
    if (text == "indoor")
        return Domain::indoor;
    if (text == "outdoor")
        return Domain::outdoor;
    throw ParameterError("unknown domain '" + text + "' (expected indoor or outdoor)");
}

void check_sample(const SceneSample& sample)
{
    if (!sample.depth.same_shape(sample.rgb.height, sample.rgb.width) || !sample.valid.same_shape(sample.depth))
        throw ShapeError("sample " + sample.id + ": RGB, depth and mask shapes differ");
    for (std::size_t k = 0; k < sample.depth.size(); ++k)
        if (sample.valid.data[k] && !(sample.depth.data[k] > 0.0 && std::isfinite(sample.depth.data[k])))
            throw DomainError("sample " + sample.id + ": non-positive depth at a valid pixel");
}

} // namespace dabc
