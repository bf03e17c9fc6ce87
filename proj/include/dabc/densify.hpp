#pragma once

#include "dabc/grid.hpp"

namespace dabc {

struct DensifyResult
{
    DepthMap depth;
    /// Euclidean norm of the residual of the solved linear system.
    double residual_norm = 0.0;
    int unknowns = 0;
};

/// Colorization-style fill of missing depth. Every unconstrained pixel r is made equal to
/// the affinity-weighted average of its 4-neighbours, sum_s w_rs d(s), with
/// w_rs proportional to exp(-(I_r - I_s)^2 / (2 sigma_r^2)), sigma_r the guide-intensity std
/// of the 3x3 window around r (clamped to >= 0.01) and each row normalized. Valid pixels are
/// hard constraints and are returned unchanged. Throws DomainError for an empty mask and
/// ShapeError for mismatched inputs.
DensifyResult densify_depth_report(const DepthMap& sparse, const ValidMask& valid, const RgbImage& guide);

DepthMap densify_depth(const DepthMap& sparse, const ValidMask& valid, const RgbImage& guide);

} // namespace dabc
