#pragma once

#include "dabc/metrics.hpp"
#include "dabc/scene.hpp"

#include <string>
#include <vector>

namespace dabc {

/// Colour-maps depth on a log scale over [lo, hi] meters. Outdoor maps run yellow (near) to
/// purple (far), indoor maps blue (near) to red (far). Invalid pixels (mask 0) are black.
void write_depth_png(const DepthMap& depth, Domain domain, const std::string& path, double lo, double hi,
                     const ValidMask* mask = nullptr);

/// Heat map of the row-normalized confusion matrix, ground-truth label on the vertical axis.
void write_confusion_png(const ConfusionMatrix& cm, const std::string& path, const std::string& title);

struct PlotSeries
{
    std::string label;
    std::vector<double> values;
};

/// Line plot of several series over their index, y axis fixed to [y_lo, y_hi].
void write_line_plot_png(const std::vector<PlotSeries>& series, const std::string& path, const std::string& title,
                         double y_lo = 0.0, double y_hi = 1.0);

} // namespace dabc
