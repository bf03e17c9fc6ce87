#include "dabc/densify.hpp"

#include "dabc/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>

namespace dabc {

namespace {

constexpr double kMinSigma = 0.01;
// keeps every row connected even across very strong guide edges
constexpr double kMinAffinity = 1e-12;

Grid<double> local_sigma(const Grid<double>& intensity)
{
    Grid<double> sigma(intensity.height, intensity.width);
    for (int y = 0; y < intensity.height; ++y)
        for (int x = 0; x < intensity.width; ++x) {
            double sum = 0.0;
            double sum2 = 0.0;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= intensity.height || xx < 0 || xx >= intensity.width)
                        continue;
                    const double v = intensity(yy, xx);
                    sum += v;
                    sum2 += v * v;
                    ++n;
                }
            const double mean = sum / n;
            const double var = std::max(0.0, sum2 / n - mean * mean);
            sigma(y, x) = std::max(kMinSigma, std::sqrt(var));
        }
    return sigma;
}

} // namespace

DensifyResult densify_depth_report(const DepthMap& sparse, const ValidMask& valid, const RgbImage& guide)
{
    if (!sparse.same_shape(valid) || !sparse.same_shape(guide.height, guide.width))
        throw ShapeError("densify: depth, mask and guide shapes differ");
    if (count_valid(valid) == 0)
        throw DomainError("densify: no valid depth pixel to propagate");

    const int h = sparse.height;
    const int w = sparse.width;
    DensifyResult result;
    result.depth = sparse;

    std::vector<int> unknown_index(sparse.size(), -1);
    int unknowns = 0;
    for (std::size_t k = 0; k < sparse.size(); ++k)
        if (!valid.data[k])
            unknown_index[k] = unknowns++;
    result.unknowns = unknowns;
    if (unknowns == 0)
        return result;

    Grid<double> intensity(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            intensity(y, x) = guide.luminance(y, x);
    const Grid<double> sigma = local_sigma(intensity);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(unknowns) * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
    constexpr std::array<std::array<int, 2>, 4> offsets{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            const int row = unknown_index[k];
            if (row < 0)
                continue;
            std::array<double, 4> weight{};
            std::array<std::size_t, 4> neighbour{};
            int count = 0;
            double total = 0.0;
            const double s2 = 2.0 * sigma(y, x) * sigma(y, x);
            for (const auto& [dy, dx] : offsets) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w)
                    continue;
                const double diff = intensity(y, x) - intensity(yy, xx);
                weight[count] = std::max(kMinAffinity, std::exp(-diff * diff / s2));
                neighbour[count] = static_cast<std::size_t>(yy) * w + xx;
                total += weight[count];
                ++count;
            }
            triplets.emplace_back(row, row, 1.0);
            for (int i = 0; i < count; ++i) {
                const double wn = weight[i] / total;
                const int col = unknown_index[neighbour[i]];
                if (col >= 0)
                    triplets.emplace_back(row, col, -wn);
                else
                    rhs[row] += wn * sparse.data[neighbour[i]];
            }
        }
    }

    Eigen::SparseMatrix<double> system(unknowns, unknowns);
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
    solver.compute(system);
    if (solver.info() != Eigen::Success)
        throw DomainError("densify: factorization failed");
    const Eigen::VectorXd solution = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw DomainError("densify: solve failed");
    result.residual_norm = (system * solution - rhs).norm();

    for (std::size_t k = 0; k < sparse.size(); ++k)
        if (unknown_index[k] >= 0)
            result.depth.data[k] = solution[unknown_index[k]];
    return result;
}

DepthMap densify_depth(const DepthMap& sparse, const ValidMask& valid, const RgbImage& guide)
{
    return densify_depth_report(sparse, valid, guide).depth;
}

} // namespace dabc
