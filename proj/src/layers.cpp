#include "dabc/layers.hpp"

#include "dabc/resample.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace dabc {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void im2col(const T* x, int channels, int h, int w, int kernel, int stride, int pad, int out_h, int out_w, T* col)
{
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        const T* src = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * out_plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* row = dst + static_cast<std::size_t>(oy) * out_w;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + out_w, T(0));
                        continue;
                    }
                    const T* src_row = src + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[ox] = (ix >= 0 && ix < w) ? src_row[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, int channels, int h, int w, int kernel, int stride, int pad, int out_h, int out_w, T* x)
{
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        T* dst = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const T* src = col + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * out_plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h)
                        continue;
                    const T* row = src + static_cast<std::size_t>(oy) * out_w;
                    T* dst_row = dst + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w)
                            dst_row[ix] += row[ox];
                    }
                }
            }
        }
    }
}

} // namespace

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(kernel / 2)
{
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0)
        throw ParameterError("invalid convolution geometry for " + name);
    weight.name = name + ".weight";
    weight.value = Tensor<T>(out_channels, in_channels, kernel, kernel);
    weight.grad = Tensor<T>(weight.value.shape());
    bias.name = name + ".bias";
    bias.value = Tensor<T>(1, out_channels, 1, 1);
    bias.grad = Tensor<T>(bias.value.shape());
}

template <typename T>
void Conv2d<T>::init(Rng& rng, double gain)
{
    const double stddev = gain / std::sqrt(static_cast<double>(in_) * kernel_ * kernel_);
    for (auto& v : weight.value.values())
        v = static_cast<T>(stddev * rng.normal());
    bias.value.fill(T(0));
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const
{
    if (in.c != in_)
        throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " input channels, got " +
                         std::to_string(in.c));
    const int oh = (in.h + 2 * pad_ - kernel_) / stride_ + 1;
    const int ow = (in.w + 2 * pad_ - kernel_) / stride_ + 1;
    if (oh <= 0 || ow <= 0)
        throw ShapeError(weight.name + ": input " + in.str() + " too small");
    return Shape{in.n, out_, oh, ow};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x)
{
    const Shape os = output_shape(x.shape());
    input_ = x;
    Tensor<T> y(os);
    const int rows = in_ * kernel_ * kernel_;
    const int cols = os.h * os.w;
    const bool pointwise = kernel_ == 1 && stride_ == 1;
    if (!pointwise)
        col_.resize(static_cast<std::size_t>(rows) * cols);
    ConstMatrixMap<T> wm(weight.value.data(), out_, rows);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bm(bias.value.data(), out_);
    for (int n = 0; n < x.n(); ++n) {
        const T* src = x.sample(n);
        if (!pointwise) {
            im2col(src, in_, x.h(), x.w(), kernel_, stride_, pad_, os.h, os.w, col_.data());
            src = col_.data();
        }
        MatrixMap<T> ym(y.sample(n), out_, cols);
        ym.noalias() = wm * ConstMatrixMap<T>(src, rows, cols);
        ym.colwise() += bm;
    }
    return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy)
{
    const Shape is = input_.shape();
    const Shape os = output_shape(is);
    if (!(dy.shape() == os))
        throw ShapeError(weight.name + ": gradient shape " + dy.shape().str() + " vs output " + os.str());
    Tensor<T> dx(is);
    const int rows = in_ * kernel_ * kernel_;
    const int cols = os.h * os.w;
    const bool pointwise = kernel_ == 1 && stride_ == 1;
    if (!pointwise)
        col_.resize(static_cast<std::size_t>(rows) * cols);
    AlignedVector<T> dcol(pointwise ? 0 : static_cast<std::size_t>(rows) * cols);
    ConstMatrixMap<T> wm(weight.value.data(), out_, rows);
    MatrixMap<T> dwm(weight.grad.data(), out_, rows);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbm(bias.grad.data(), out_);
    for (int n = 0; n < is.n; ++n) {
        ConstMatrixMap<T> dym(dy.sample(n), out_, cols);
        const T* src = input_.sample(n);
        if (!pointwise) {
            im2col(src, in_, is.h, is.w, kernel_, stride_, pad_, os.h, os.w, col_.data());
            src = col_.data();
        }
        dwm.noalias() += dym * ConstMatrixMap<T>(src, rows, cols).transpose();
        dbm += dym.rowwise().sum();
        if (pointwise) {
            MatrixMap<T>(dx.sample(n), rows, cols).noalias() = wm.transpose() * dym;
        } else {
            MatrixMap<T>(dcol.data(), rows, cols).noalias() = wm.transpose() * dym;
            col2im(dcol.data(), in_, is.h, is.w, kernel_, stride_, pad_, os.h, os.w, dx.sample(n));
        }
    }
    return dx;
}

template <typename T>
void Conv2d<T>::collect(ParameterList<T>& out)
{
    out.push_back(&weight);
    out.push_back(&bias);
}

template <typename T>
void relu_inplace(Tensor<T>& x)
{
    for (auto& v : x.values())
        v = v > T(0) ? v : T(0);
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& output)
{
    dy.require_same_shape(output, "relu backward");
    Tensor<T> dx(dy.shape());
    const T* g = dy.data();
    const T* y = output.data();
    T* d = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i)
        d[i] = y[i] > T(0) ? g[i] : T(0);
    return dx;
}

template <typename T>
void sigmoid_inplace(Tensor<T>& x)
{
    for (auto& v : x.values())
        v = T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w)
{
    const LinearTaps ty = linear_taps(x.h(), out_h);
    const LinearTaps tx = linear_taps(x.w(), out_w);
    Tensor<T> y(x.n(), x.c(), out_h, out_w);
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            const T* src = x.plane(n, c);
            T* dst = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const T* r0 = src + static_cast<std::size_t>(ty.lo[oy]) * x.w();
                const T* r1 = src + static_cast<std::size_t>(ty.hi[oy]) * x.w();
                const T fy = static_cast<T>(ty.frac[oy]);
                for (int ox = 0; ox < out_w; ++ox) {
                    const T fx = static_cast<T>(tx.frac[ox]);
                    const T top = r0[tx.lo[ox]] + fx * (r0[tx.hi[ox]] - r0[tx.lo[ox]]);
                    const T bottom = r1[tx.lo[ox]] + fx * (r1[tx.hi[ox]] - r1[tx.lo[ox]]);
                    dst[static_cast<std::size_t>(oy) * out_w + ox] = top + fy * (bottom - top);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w)
{
    const LinearTaps ty = linear_taps(in_h, dy.h());
    const LinearTaps tx = linear_taps(in_w, dy.w());
    Tensor<T> dx(dy.n(), dy.c(), in_h, in_w);
    for (int n = 0; n < dy.n(); ++n) {
        for (int c = 0; c < dy.c(); ++c) {
            const T* g = dy.plane(n, c);
            T* dst = dx.plane(n, c);
            for (int oy = 0; oy < dy.h(); ++oy) {
                T* r0 = dst + static_cast<std::size_t>(ty.lo[oy]) * in_w;
                T* r1 = dst + static_cast<std::size_t>(ty.hi[oy]) * in_w;
                const T fy = static_cast<T>(ty.frac[oy]);
                for (int ox = 0; ox < dy.w(); ++ox) {
                    const T fx = static_cast<T>(tx.frac[ox]);
                    const T v = g[static_cast<std::size_t>(oy) * dy.w() + ox];
                    const T top = v * (T(1) - fy);
                    const T bottom = v * fy;
                    r0[tx.lo[ox]] += top * (T(1) - fx);
                    r0[tx.hi[ox]] += top * fx;
                    r1[tx.lo[ox]] += bottom * (T(1) - fx);
                    r1[tx.hi[ox]] += bottom * fx;
                }
            }
        }
    }
    return dx;
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x)
{
    Tensor<T> y(x.n(), x.c(), 1, 1);
    const std::size_t plane = x.shape().plane();
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            const T* p = x.plane(n, c);
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i)
                sum += p[i];
            y.at(n, c, 0, 0) = static_cast<T>(sum / static_cast<double>(plane));
        }
    }
    return y;
}

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w)
{
    Tensor<T> dx(dy.n(), dy.c(), h, w);
    const T scale = T(1) / static_cast<T>(h * w);
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            T* p = dx.plane(n, c);
            std::fill(p, p + dx.shape().plane(), dy.at(n, c, 0, 0) * scale);
        }
    return dx;
}

template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& x, int h, int w)
{
    if (x.h() != 1 || x.w() != 1)
        throw ShapeError("broadcast_spatial expects a (N, C, 1, 1) tensor, got " + x.shape().str());
    Tensor<T> y(x.n(), x.c(), h, w);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            T* p = y.plane(n, c);
            std::fill(p, p + y.shape().plane(), x.at(n, c, 0, 0));
        }
    return y;
}

template <typename T>
Tensor<T> broadcast_spatial_backward(const Tensor<T>& dy)
{
    Tensor<T> dx(dy.n(), dy.c(), 1, 1);
    const std::size_t plane = dy.shape().plane();
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            const T* p = dy.plane(n, c);
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i)
                sum += p[i];
            dx.at(n, c, 0, 0) = static_cast<T>(sum);
        }
    return dx;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits)
{
    Tensor<T> probs(logits.shape());
    const std::size_t plane = logits.shape().plane();
    const int channels = logits.c();
    std::vector<double> buffer(channels);
    for (int n = 0; n < logits.n(); ++n) {
        const T* src = logits.sample(n);
        T* dst = probs.sample(n);
        for (std::size_t px = 0; px < plane; ++px) {
            double peak = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < channels; ++c)
                peak = std::max(peak, static_cast<double>(src[c * plane + px]));
            double total = 0.0;
            for (int c = 0; c < channels; ++c) {
                buffer[c] = std::exp(static_cast<double>(src[c * plane + px]) - peak);
                total += buffer[c];
            }
            for (int c = 0; c < channels; ++c)
                dst[c * plane + px] = static_cast<T>(buffer[c] / total);
        }
    }
    return probs;
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, bool train, Rng* rng)
{
    active_ = train && rate_ > 0.0;
    if (!active_)
        return x;
    if (rng == nullptr)
        throw ParameterError("dropout in training mode needs a random source");
    mask_ = Tensor<T>(x.shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = rng->uniform() < rate_ ? T(0) : keep_scale;
        mask_.data()[i] = m;
        y.data()[i] = x.data()[i] * m;
    }
    return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy) const
{
    if (!active_)
        return dy;
    dy.require_same_shape(mask_, "dropout backward");
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i)
        dx.data()[i] = dy.data()[i] * mask_.data()[i];
    return dx;
}

#define DABC_INSTANTIATE_LAYERS(T)                                                                                     \
    template class Conv2d<T>;                                                                                          \
    template class Dropout<T>;                                                                                         \
    template void relu_inplace<T>(Tensor<T>&);                                                                         \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                           \
    template void sigmoid_inplace<T>(Tensor<T>&);                                                                      \
    template Tensor<T> resize_bilinear<T>(const Tensor<T>&, int, int);                                                 \
    template Tensor<T> resize_bilinear_backward<T>(const Tensor<T>&, int, int);                                        \
    template Tensor<T> global_average_pool<T>(const Tensor<T>&);                                                       \
    template Tensor<T> global_average_pool_backward<T>(const Tensor<T>&, int, int);                                    \
    template Tensor<T> broadcast_spatial<T>(const Tensor<T>&, int, int);                                               \
    template Tensor<T> broadcast_spatial_backward<T>(const Tensor<T>&);                                                \
    template Tensor<T> softmax_channels<T>(const Tensor<T>&);

DABC_INSTANTIATE_LAYERS(float)
DABC_INSTANTIATE_LAYERS(double)

} // namespace dabc
