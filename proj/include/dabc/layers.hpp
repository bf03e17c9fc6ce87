#pragma once

#include "dabc/random.hpp"
#include "dabc/tensor.hpp"

#include <string>
#include <vector>

namespace dabc {

/// A trainable array with its gradient accumulator.
template <typename T>
struct Parameter
{
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    /// Whether the optimizer applies weight decay to this parameter.
    bool decay = true;

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

/// 2-D convolution with "same" padding (pad = kernel / 2) and optional stride, via im2col + GEMM.
/// Forward caches its input for the backward pass.
template <typename T>
class Conv2d
{
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride = 1);

    /// Weights ~ N(0, gain^2 / fan_in), bias zero.
    void init(Rng& rng, double gain);

    Shape output_shape(const Shape& in) const;
    Tensor<T> forward(const Tensor<T>& x);
    /// Accumulates weight/bias gradients and returns the input gradient.
    Tensor<T> backward(const Tensor<T>& dy);

    void collect(ParameterList<T>& out);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int kernel() const { return kernel_; }
    int stride() const { return stride_; }

    Parameter<T> weight;
    Parameter<T> bias;

private:
    int in_ = 0;
    int out_ = 0;
    int kernel_ = 1;
    int stride_ = 1;
    int pad_ = 0;
    Tensor<T> input_;
    AlignedVector<T> col_;
};

template <typename T>
void relu_inplace(Tensor<T>& x);
/// dx = dy where the cached activation output is positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& output);

template <typename T>
void sigmoid_inplace(Tensor<T>& x);

/// Bilinear resize with half-pixel centers and edge clamping.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w);
/// Adjoint of resize_bilinear.
template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w);

/// Mean over the spatial axes: (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x);
/// Adjoint of global_average_pool.
template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w);
/// (N, C, 1, 1) -> (N, C, h, w) by copying.
template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& x, int h, int w);
/// Adjoint of broadcast_spatial: spatial sums.
template <typename T>
Tensor<T> broadcast_spatial_backward(const Tensor<T>& dy);

/// Per-pixel softmax over the channel axis.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

/// Inverted dropout: kept units are scaled by 1 / (1 - rate) so evaluation is the identity.
template <typename T>
class Dropout
{
public:
    explicit Dropout(double rate = 0.0) : rate_(rate) {}
    double rate() const { return rate_; }
    void set_rate(double rate) { rate_ = rate; }

    /// With `train` false or rate 0 this is the identity and no RNG is needed.
    Tensor<T> forward(const Tensor<T>& x, bool train, Rng* rng);
    Tensor<T> backward(const Tensor<T>& dy) const;

private:
    double rate_ = 0.0;
    bool active_ = false;
    Tensor<T> mask_;
};

} // namespace dabc
