#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vse/autograd.hpp"
#include "vse/init.hpp"

namespace vse {

enum class Activation { relu, tanh };

// Multi-head self-attention over the rows of a feature matrix (positions or words).
template <typename T>
struct AttentionParams {
    Var<T> hidden_weight;  // d_a x d
    Var<T> head_weight;    // r x d_a
    Activation activation = Activation::relu;
    double dropout = 0.0;

    std::size_t heads() const { return head_weight.value().rows(); }
    std::size_t hidden_dim() const { return hidden_weight.value().rows(); }
    std::size_t feature_dim() const { return hidden_weight.value().cols(); }
};

template <typename T>
AttentionParams<T> make_attention(std::size_t feature_dim, std::size_t hidden_dim, std::size_t heads,
                                  Activation activation, double dropout, Rng& rng);

// Concatenated heads -> joint space, followed by L2 normalization.
template <typename T>
struct ProjectionParams {
    LinearParams<T> layer;  // (r*d) x d'
    double dropout = 0.0;

    std::size_t joint_dim() const { return layer.out_dim(); }
};

template <typename T>
ProjectionParams<T> make_projection(std::size_t heads, std::size_t feature_dim, std::size_t joint_dim, double dropout,
                                    Rng& rng);

// M = softmax_rows(W_a act(W_b features^T)), r x l. Dropout on the activated hidden layer
// is applied only when `rng` is given.
template <typename T>
Var<T> attention_weights(const Var<T>& features, const AttentionParams<T>& params, Rng* rng = nullptr);

// F = M features, r x d.
template <typename T>
Var<T> attend(const Var<T>& weights, const Var<T>& features);

// normalize(concat(f_1..f_r) W + b), returned as a 1 x d' row.
template <typename T>
Var<T> project_joint(const Var<T>& embedding, const ProjectionParams<T>& params, Rng* rng = nullptr);

template <typename T>
struct EncodedItem {
    Var<T> joint;
    Var<T> weights;
};

template <typename T>
EncodedItem<T> encode_item(const Var<T>& features, const AttentionParams<T>& attn, const ProjectionParams<T>& proj,
                           Rng* rng = nullptr);

// Row-major raster, pixel (x, y) at y * width + x.
struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

// Reshapes one attention row onto the w x h grid (same order as flatten_spatial) and
// upsamples with corner-aligned bilinear interpolation.
Raster attention_to_heatmap(std::span<const double> row, std::size_t w, std::size_t h, std::size_t out_width,
                            std::size_t out_height);

}  // namespace vse
