#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "vse/autograd.hpp"

namespace vse {

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> glorot_uniform(Shape dims, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(std::move(dims));
    for (auto& v : t.values()) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
Tensor<T> uniform_init(Shape dims, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(std::move(dims));
    for (auto& v : t.values()) v = static_cast<T>(dist(rng));
    return t;
}

// Random orthogonal n x n matrix (Gram-Schmidt on Gaussian columns).
template <typename T>
Tensor<T> orthogonal_init(std::size_t n, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (std::size_t c = 0; c < n; ++c) {
        auto& v = q[c];
        for (auto& x : v) x = dist(rng);
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0;
            for (std::size_t r = 0; r < n; ++r) dot += v[r] * q[p][r];
            for (std::size_t r = 0; r < n; ++r) v[r] -= dot * q[p][r];
        }
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
    }
    Tensor<T> t(Shape{n, n});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) t(r, c) = static_cast<T>(q[c][r]);
    }
    return t;
}

// Affine map applied to row vectors: y = x * weight + bias, weight is in x out.
template <typename T>
struct LinearParams {
    Var<T> weight;
    Var<T> bias;

    std::size_t in_dim() const { return weight.value().rows(); }
    std::size_t out_dim() const { return weight.value().cols(); }
};

template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
    return {parameter(glorot_uniform<T>(Shape{in, out}, in, out, rng)), parameter(Tensor<T>(Shape{out}))};
}

template <typename T>
Var<T> apply(const LinearParams<T>& p, const Var<T>& x) {
    return linear(x, p.weight, p.bias);
}

}  // namespace vse
