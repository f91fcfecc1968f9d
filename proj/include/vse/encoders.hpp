#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vse/autograd.hpp"
#include "vse/init.hpp"

namespace vse {

// Grid of feature vectors. `values` has dims {height, width, channels}, so the cell at
// column x and row y starts at flat offset (y * width + x) * channels.
template <typename T>
struct SpatialFeatureMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    Tensor<T> values;

    SpatialFeatureMap() = default;
    SpatialFeatureMap(std::size_t w, std::size_t h, std::size_t c)
        : width(w), height(h), channels(c), values(Shape{h, w, c}) {}
    explicit SpatialFeatureMap(Tensor<T> hwc);

    T& at(std::size_t x, std::size_t y, std::size_t c) { return values[(y * width + x) * channels + c]; }
    const T& at(std::size_t x, std::size_t y, std::size_t c) const {
        return values[(y * width + x) * channels + c];
    }
};

using TokenSequence = std::vector<std::size_t>;

// Row index of cell (x, y) after flattening.
inline std::size_t flat_index(std::size_t x, std::size_t y, std::size_t width) { return y * width + x; }

template <typename T>
Tensor<T> flatten_spatial(const SpatialFeatureMap<T>& map);
template <typename T>
SpatialFeatureMap<T> unflatten_spatial(const Tensor<T>& flat, std::size_t width, std::size_t height);
// Differentiable form over a {height, width, channels} variable; returns {height*width, channels}.
template <typename T>
Var<T> flatten_spatial(const Var<T>& map);

// 1x1 convolution: every cell is mapped through the same affine layer (channels -> d).
template <typename T>
SpatialFeatureMap<T> adapt_features(const SpatialFeatureMap<T>& map, const LinearParams<T>& adapter);
template <typename T>
Var<T> adapt_features(const Var<T>& map, const LinearParams<T>& adapter);

template <typename T>
Var<T> lookup_embeddings(const TokenSequence& tokens, const Var<T>& table);

// Elman cell: h_i = tanh(x_i Wx + h_{i-1} Wh + b).
template <typename T>
struct RecurrentLayer {
    Var<T> input_weight;   // in x d
    Var<T> hidden_weight;  // d x d
    Var<T> bias;           // d
};

template <typename T>
struct RecurrentEncoderParams {
    std::vector<RecurrentLayer<T>> layers;
    // Only used when bidirectional: a reversed stack whose outputs are concatenated with
    // the forward stack and projected back to d.
    std::vector<RecurrentLayer<T>> reverse_layers;
    std::optional<LinearParams<T>> merge;
    double dropout = 0.0;
    bool bidirectional = false;
    // Layers after the first add their input to their output (h = x + cell(x)).
    bool residual = false;

    std::size_t hidden_dim() const { return layers.front().hidden_weight.value().rows(); }
    std::vector<Var<T>> parameters() const;
};

template <typename T>
RecurrentEncoderParams<T> make_recurrent_encoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers,
                                                 double dropout, bool bidirectional, Rng& rng);

// One application of the cell to a single input row.
template <typename T>
Var<T> recurrent_cell(const Var<T>& x, const Var<T>& h_prev, const RecurrentLayer<T>& layer);

// All top-layer hidden states, one row per token. Initial state is zero. Dropout on the
// input of every layer after the first is active only when `rng` is given.
template <typename T>
Var<T> encode_text(const Var<T>& embedded, const RecurrentEncoderParams<T>& params, Rng* rng = nullptr);

// Stack of non-overlapping strided convolutions (kernel = stride), ReLU after each layer.
template <typename T>
struct BackboneParams {
    std::vector<std::size_t> strides;
    std::vector<LinearParams<T>> layers;  // (stride*stride*in) x out

    std::size_t total_stride() const;
    std::size_t out_channels() const { return layers.back().out_dim(); }
    std::vector<Var<T>> parameters() const;
};

template <typename T>
BackboneParams<T> make_toy_backbone(std::size_t in_channels, std::vector<std::size_t> strides,
                                    std::vector<std::size_t> channels, Rng& rng);

// image: {H, W, C}; returns {H/stride, W/stride, out_channels}.
template <typename T>
Var<T> toy_visual_backbone(const Var<T>& image, const BackboneParams<T>& params);

}  // namespace vse
