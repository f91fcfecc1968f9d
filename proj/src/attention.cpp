#include "vse/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vse {

template <typename T>
AttentionParams<T> make_attention(std::size_t feature_dim, std::size_t hidden_dim, std::size_t heads,
                                  Activation activation, double dropout_p, Rng& rng) {
    if (heads == 0 || hidden_dim == 0) throw ConfigError("attention needs r >= 1 and d_a >= 1");
    AttentionParams<T> p;
    p.hidden_weight = parameter(glorot_uniform<T>(Shape{hidden_dim, feature_dim}, feature_dim, hidden_dim, rng));
    p.head_weight = parameter(glorot_uniform<T>(Shape{heads, hidden_dim}, hidden_dim, heads, rng));
    p.activation = activation;
    p.dropout = dropout_p;
    return p;
}

template <typename T>
ProjectionParams<T> make_projection(std::size_t heads, std::size_t feature_dim, std::size_t joint_dim,
                                    double dropout_p, Rng& rng) {
    if (joint_dim == 0) throw ConfigError("joint dimension must be positive");
    return {make_linear<T>(heads * feature_dim, joint_dim, rng), dropout_p};
}

template <typename T>
Var<T> attention_weights(const Var<T>& features, const AttentionParams<T>& params, Rng* rng) {
    if (features.value().rank() != 2 || features.value().cols() != params.feature_dim()) {
        throw ShapeError("attention_weights: features " + shape_str(features.dims()) + " but attention expects " +
                         std::to_string(params.feature_dim()) + " columns");
    }
    auto pre = matmul(params.hidden_weight, transpose(features));  // d_a x l
    auto hidden = params.activation == Activation::relu ? relu(pre) : tanh_act(pre);
    if (rng) hidden = dropout(hidden, params.dropout, *rng);
    return softmax_rows(matmul(params.head_weight, hidden));
}

template <typename T>
Var<T> attend(const Var<T>& weights, const Var<T>& features) {
    if (weights.value().rank() != 2 || features.value().rank() != 2 ||
        weights.value().cols() != features.value().rows()) {
        throw ShapeError("attend: weights " + shape_str(weights.dims()) + " do not match features " +
                         shape_str(features.dims()));
    }
    return pool_rows(weights, features);
}

template <typename T>
Var<T> project_joint(const Var<T>& embedding, const ProjectionParams<T>& params, Rng* rng) {
    if (embedding.size() != params.layer.in_dim()) {
        throw ShapeError("project_joint: embedding " + shape_str(embedding.dims()) + " but projection expects " +
                         std::to_string(params.layer.in_dim()) + " inputs");
    }
    auto flat = reshape(embedding, Shape{1, embedding.size()});
    if (rng) flat = dropout(flat, params.dropout, *rng);
    return l2_normalize(apply(params.layer, flat));
}

template <typename T>
EncodedItem<T> encode_item(const Var<T>& features, const AttentionParams<T>& attn, const ProjectionParams<T>& proj,
                           Rng* rng) {
    auto weights = attention_weights(features, attn, rng);
    auto joint = project_joint(attend(weights, features), proj, rng);
    return {std::move(joint), std::move(weights)};
}

Raster attention_to_heatmap(std::span<const double> row, std::size_t w, std::size_t h, std::size_t out_width,
                            std::size_t out_height) {
    if (w == 0 || h == 0 || row.size() != w * h) {
        throw ShapeError("attention_to_heatmap: row of " + std::to_string(row.size()) + " weights for a " +
                         std::to_string(w) + "x" + std::to_string(h) + " grid");
    }
    if (out_width < w || out_height < h) {
        throw ShapeError("attention_to_heatmap: target " + std::to_string(out_width) + "x" +
                         std::to_string(out_height) + " is smaller than the grid");
    }
    Raster r{out_width, out_height, std::vector<double>(out_width * out_height)};
    auto source = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
        return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1)
                         : 0.0;
    };
    for (std::size_t y = 0; y < out_height; ++y) {
        const double sy = source(y, out_height, h);
        const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_width; ++x) {
            const double sx = source(x, out_width, w);
            const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = (1 - fx) * row[y0 * w + x0] + fx * row[y0 * w + x1];
            const double bottom = (1 - fx) * row[y1 * w + x0] + fx * row[y1 * w + x1];
            r.pixels[y * out_width + x] = (1 - fy) * top + fy * bottom;
        }
    }
    return r;
}

#define VSE_INSTANTIATE_ATTENTION(T)                                                                               \
    template AttentionParams<T> make_attention<T>(std::size_t, std::size_t, std::size_t, Activation, double, Rng&); \
    template ProjectionParams<T> make_projection<T>(std::size_t, std::size_t, std::size_t, double, Rng&);         \
    template Var<T> attention_weights(const Var<T>&, const AttentionParams<T>&, Rng*);                             \
    template Var<T> attend(const Var<T>&, const Var<T>&);                                                          \
    template Var<T> project_joint(const Var<T>&, const ProjectionParams<T>&, Rng*);                                \
    template EncodedItem<T> encode_item(const Var<T>&, const AttentionParams<T>&, const ProjectionParams<T>&, Rng*);

VSE_INSTANTIATE_ATTENTION(float)
VSE_INSTANTIATE_ATTENTION(double)

}  // namespace vse
