#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vse/errors.hpp"

namespace vse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

// Dense row-major tensor. Rank 0 is a scalar holding one value.
template <typename T>
class Tensor {
   public:
    using value_type = T;

    Tensor() : data_(1, T(0)) {}

    explicit Tensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)), data_(shape_size(dims_), fill) {
        check_dims();
    }

    Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims();
        if (data_.size() != shape_size(dims_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                             shape_str(dims_));
        }
    }

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data) {
        return Tensor(Shape{rows, cols}, std::move(data));
    }

    static Tensor identity(std::size_t n) {
        Tensor t(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = T(1);
        return t;
    }

    const Shape& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }

    // Matrix view: rank-1 tensors are treated as a single row.
    std::size_t rows() const { return dims_.size() >= 2 ? dims_[0] : 1; }
    std::size_t cols() const {
        if (dims_.empty()) return 1;
        return dims_.size() == 1 ? dims_[0] : data_.size() / dims_[0];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    T item() const {
        if (data_.size() != 1) throw ContractError("item() on tensor with dims " + shape_str(dims_));
        return data_[0];
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& vec() const noexcept { return data_; }

    Tensor reshaped(Shape dims) const {
        if (shape_size(dims) != data_.size()) {
            throw ShapeError("cannot reshape " + shape_str(dims_) + " to " + shape_str(dims));
        }
        return Tensor(std::move(dims), data_);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.dims_ == b.dims_ && a.data_ == b.data_; }

   private:
    void check_dims() const {
        for (std::size_t d : dims_)
            if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(dims_));
    }

    Shape dims_;
    std::vector<T> data_;
};

}  // namespace vse
