#pragma once

#include "dabc/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace dabc {

/// NCHW tensor shape.
struct Shape
{
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const
    {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
               ")";
    }
};

/// Over-aligned allocator. Vectorized Eigen reductions pick their summation order from the
/// buffer address, so buffers feeding them get a fixed alignment to keep results reproducible.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator
{
    using value_type = T;

    template <typename U>
    struct rebind
    {
        using other = AlignedAllocator<U, Align>;
    };

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }

    template <typename U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept
    {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense 4-D array in NCHW layout.
template <typename T>
class Tensor
{
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill)
    {
        if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
            throw ShapeError("negative tensor dimension " + shape.str());
    }
    Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape{n, c, h, w}, fill) {}

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.c * shape_.plane(); }
    const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * shape_.c * shape_.plane(); }
    T* plane(int n, int c) { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }
    const T* plane(int n, int c) const { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }

    T& at(int n, int c, int y, int x) { return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x]; }
    T at(int n, int c, int y, int x) const { return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x]; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    Tensor& operator+=(const Tensor& other)
    {
        require_same_shape(other, "add");
        for (std::size_t i = 0; i < data_.size(); ++i)
            data_[i] += other.data_[i];
        return *this;
    }

    void require_same_shape(const Tensor& other, const char* what) const
    {
        if (!(shape_ == other.shape_))
            throw ShapeError(std::string(what) + ": shape " + shape_.str() + " vs " + other.shape_.str());
    }

    template <typename U>
    Tensor<U> cast() const
    {
        Tensor<U> out(shape_);
        std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    AlignedVector<T> data_;
};

} // namespace dabc
