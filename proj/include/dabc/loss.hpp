#pragma once

#include "dabc/quantizer.hpp"
#include "dabc/tensor.hpp"

#include <cstdint>

namespace dabc {

/// Per-pixel supervision at the resolution of the network output.
struct Targets
{
    Tensor<int> labels;          // (N, 1, h, w), only meaningful where mask is set
    Tensor<double> depth;        // (N, 1, h, w) meters, 0 where invalid
    Tensor<std::uint8_t> mask;   // (N, 1, h, w)
};

/// Labels from the depth via `depth_to_label`, computed at valid pixels only.
Targets make_targets(Tensor<double> depth, Tensor<std::uint8_t> mask, const QuantizationSpec& spec);

template <typename T>
struct LossResult
{
    double loss = 0.0;
    /// Gradient with respect to the head output (logits or log10 depth).
    Tensor<T> grad;
    std::size_t count = 0;
};

/// Mean negative natural-log likelihood of the true label over valid pixels. `probs` holds
/// softmax outputs; the gradient is (probs - onehot) / N with respect to the logits and zero
/// at masked pixels. Throws EmptyBatchError when no pixel is valid.
template <typename T>
LossResult<T> classification_loss(const Tensor<T>& probs, const Targets& targets);

/// Mean over valid pixels of (pred - log10(depth))^2. Throws EmptyBatchError when no pixel is valid.
template <typename T>
LossResult<T> regression_loss(const Tensor<T>& pred_log_depth, const Targets& targets);

} // namespace dabc
