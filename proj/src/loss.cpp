#include "dabc/loss.hpp"

#include "dabc/errors.hpp"

#include <cmath>
#include <limits>

namespace dabc {

namespace {

void check_target_shapes(const Targets& t)
{
    const Shape& s = t.mask.shape();
    if (s.c != 1 || !(t.labels.shape() == s) || !(t.depth.shape() == s))
        throw ShapeError("inconsistent target shapes");
}

} // namespace

Targets make_targets(Tensor<double> depth, Tensor<std::uint8_t> mask, const QuantizationSpec& spec)
{
    if (!(depth.shape() == mask.shape()) || depth.c() != 1)
        throw ShapeError("depth and mask targets must be (N, 1, h, w) and agree");
    Targets t;
    t.labels = Tensor<int>(mask.shape());
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask.data()[k])
            t.labels.data()[k] = depth_to_label(depth.data()[k], spec);
        else
            depth.data()[k] = 0.0;
    }
    t.depth = std::move(depth);
    t.mask = std::move(mask);
    return t;
}

template <typename T>
LossResult<T> classification_loss(const Tensor<T>& probs, const Targets& targets)
{
    check_target_shapes(targets);
    const Shape& s = probs.shape();
    const Shape& ts = targets.mask.shape();
    if (s.n != ts.n || s.h != ts.h || s.w != ts.w)
        throw ShapeError("score volume " + s.str() + " does not match targets " + ts.str());

    std::size_t count = 0;
    for (std::size_t k = 0; k < targets.mask.size(); ++k)
        count += targets.mask.data()[k] != 0;
    if (count == 0)
        throw EmptyBatchError("no valid pixels in batch");

    LossResult<T> out;
    out.count = count;
    out.grad = Tensor<T>(s);
    const double inv_n = 1.0 / static_cast<double>(count);
    const std::size_t plane = s.plane();
    double total = 0.0;
    for (int n = 0; n < s.n; ++n) {
        const std::uint8_t* mask = targets.mask.plane(n, 0);
        const int* labels = targets.labels.plane(n, 0);
        for (std::size_t i = 0; i < plane; ++i) {
            if (!mask[i])
                continue;
            const int y = labels[i];
            if (y < 0 || y >= s.c)
                throw DomainError("label " + std::to_string(y) + " outside the score volume");
            const T* p = probs.sample(n) + i;
            T* g = out.grad.sample(n) + i;
            const double py = std::max(static_cast<double>(p[static_cast<std::size_t>(y) * plane]),
                                       std::numeric_limits<double>::min());
            total -= std::log(py);
            for (int c = 0; c < s.c; ++c)
                g[static_cast<std::size_t>(c) * plane] = static_cast<T>(p[static_cast<std::size_t>(c) * plane] * inv_n);
            g[static_cast<std::size_t>(y) * plane] -= static_cast<T>(inv_n);
        }
    }
    out.loss = total * inv_n;
    return out;
}

template <typename T>
LossResult<T> regression_loss(const Tensor<T>& pred, const Targets& targets)
{
    check_target_shapes(targets);
    if (!(pred.shape() == targets.mask.shape()))
        throw ShapeError("prediction " + pred.shape().str() + " does not match targets " + targets.mask.shape().str());

    std::size_t count = 0;
    for (std::size_t k = 0; k < targets.mask.size(); ++k)
        count += targets.mask.data()[k] != 0;
    if (count == 0)
        throw EmptyBatchError("no valid pixels in batch");

    LossResult<T> out;
    out.count = count;
    out.grad = Tensor<T>(pred.shape());
    const double inv_n = 1.0 / static_cast<double>(count);
    double total = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (!targets.mask.data()[k])
            continue;
        const double d = targets.depth.data()[k];
        if (!(d > 0.0))
            throw DomainError("non-positive target depth at a valid pixel");
        const double r = static_cast<double>(pred.data()[k]) - std::log10(d);
        total += r * r;
        out.grad.data()[k] = static_cast<T>(2.0 * r * inv_n);
    }
    out.loss = total * inv_n;
    return out;
}

template LossResult<float> classification_loss<float>(const Tensor<float>&, const Targets&);
template LossResult<double> classification_loss<double>(const Tensor<double>&, const Targets&);
template LossResult<float> regression_loss<float>(const Tensor<float>&, const Targets&);
template LossResult<double> regression_loss<double>(const Tensor<double>&, const Targets&);

} // namespace dabc
