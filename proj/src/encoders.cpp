#include "vse/encoders.hpp"

#include <string>

namespace vse {

template <typename T>
SpatialFeatureMap<T>::SpatialFeatureMap(Tensor<T> hwc) {
    if (hwc.rank() != 3) throw ShapeError("feature map must have rank 3 {h, w, c}, got " + shape_str(hwc.dims()));
    height = hwc.dim(0);
    width = hwc.dim(1);
    channels = hwc.dim(2);
    values = std::move(hwc);
}

template <typename T>
Tensor<T> flatten_spatial(const SpatialFeatureMap<T>& map) {
    return map.values.reshaped(Shape{map.width * map.height, map.channels});
}

template <typename T>
SpatialFeatureMap<T> unflatten_spatial(const Tensor<T>& flat, std::size_t width, std::size_t height) {
    if (flat.rank() != 2 || flat.rows() != width * height) {
        throw ShapeError("unflatten: " + shape_str(flat.dims()) + " does not have " + std::to_string(width * height) +
                         " rows");
    }
    return SpatialFeatureMap<T>(flat.reshaped(Shape{height, width, flat.cols()}));
}

template <typename T>
Var<T> flatten_spatial(const Var<T>& map) {
    if (map.value().rank() != 3) throw ShapeError("flatten_spatial: expected {h, w, c}, got " + shape_str(map.dims()));
    const auto& d = map.dims();
    return reshape(map, Shape{d[0] * d[1], d[2]});
}

template <typename T>
SpatialFeatureMap<T> adapt_features(const SpatialFeatureMap<T>& map, const LinearParams<T>& adapter) {
    auto out = adapt_features(constant(map.values), adapter);
    return SpatialFeatureMap<T>(out.value());
}

template <typename T>
Var<T> adapt_features(const Var<T>& map, const LinearParams<T>& adapter) {
    if (map.value().rank() != 3) throw ShapeError("adapt_features: expected {h, w, c}, got " + shape_str(map.dims()));
    const auto d = map.dims();
    if (adapter.in_dim() != d[2]) {
        throw ShapeError("adapt_features: map has " + std::to_string(d[2]) + " channels, adapter expects " +
                         std::to_string(adapter.in_dim()));
    }
    auto flat = apply(adapter, flatten_spatial(map));
    return reshape(flat, Shape{d[0], d[1], adapter.out_dim()});
}

template <typename T>
Var<T> lookup_embeddings(const TokenSequence& tokens, const Var<T>& table) {
    if (tokens.empty()) throw ContractError("lookup_embeddings: empty token sequence");
    const std::size_t vocab = table.value().rows(), k = table.value().cols();
    std::vector<std::size_t> idx;
    idx.reserve(tokens.size() * k);
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        if (tokens[pos] >= vocab) throw VocabularyError(tokens[pos], pos, vocab);
        for (std::size_t j = 0; j < k; ++j) idx.push_back(tokens[pos] * k + j);
    }
    return gather(table, std::move(idx), Shape{tokens.size(), k});
}

template <typename T>
std::vector<Var<T>> RecurrentEncoderParams<T>::parameters() const {
    std::vector<Var<T>> out;
    for (const auto* stack : {&layers, &reverse_layers}) {
        for (const auto& l : *stack) {
            out.push_back(l.input_weight);
            out.push_back(l.hidden_weight);
            out.push_back(l.bias);
        }
    }
    if (merge) {
        out.push_back(merge->weight);
        out.push_back(merge->bias);
    }
    return out;
}

namespace {

template <typename T>
std::vector<RecurrentLayer<T>> make_stack(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers, Rng& rng) {
    std::vector<RecurrentLayer<T>> out;
    for (std::size_t i = 0; i < layers; ++i) {
        const std::size_t in = i == 0 ? input_dim : hidden_dim;
        out.push_back({parameter(glorot_uniform<T>(Shape{in, hidden_dim}, in, hidden_dim, rng)),
                       parameter(orthogonal_init<T>(hidden_dim, rng)),
                       parameter(Tensor<T>(Shape{hidden_dim}))});
    }
    return out;
}

template <typename T>
Var<T> run_layer(const Var<T>& input, const RecurrentLayer<T>& layer) {
    const std::size_t n = input.value().rows();
    const std::size_t d = layer.hidden_weight.value().rows();
    // Input projections for all steps at once; the recurrence only adds h_{i-1} Wh.
    const auto projected = add_row_bias(matmul(input, layer.input_weight), layer.bias);
    std::vector<Var<T>> states;
    states.reserve(n);
    Var<T> h = constant(Tensor<T>(Shape{1, d}));
    for (std::size_t i = 0; i < n; ++i) {
        h = tanh_act(add(row(projected, i), matmul(h, layer.hidden_weight)));
        states.push_back(h);
    }
    return stack_rows(std::span<const Var<T>>(states));
}

template <typename T>
Var<T> run_stack(Var<T> x, const std::vector<RecurrentLayer<T>>& layers, double dropout_p, bool residual, Rng* rng) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i == 0) {
            x = run_layer(x, layers[i]);
            continue;
        }
        const auto in = rng ? dropout(x, dropout_p, *rng) : x;
        x = residual ? add(x, run_layer(in, layers[i])) : run_layer(in, layers[i]);
    }
    return x;
}

template <typename T>
Var<T> reverse_rows(const Var<T>& x) {
    const std::size_t n = x.value().rows(), k = x.value().cols();
    std::vector<std::size_t> idx;
    idx.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) idx.push_back((n - 1 - i) * k + j);
    return gather(x, std::move(idx), Shape{n, k});
}

}  // namespace

template <typename T>
RecurrentEncoderParams<T> make_recurrent_encoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers,
                                                 double dropout_p, bool bidirectional, Rng& rng) {
    if (layers == 0) throw ConfigError("recurrent encoder needs at least one layer");
    RecurrentEncoderParams<T> p;
    p.layers = make_stack<T>(input_dim, hidden_dim, layers, rng);
    p.dropout = dropout_p;
    p.bidirectional = bidirectional;
    if (bidirectional) {
        p.reverse_layers = make_stack<T>(input_dim, hidden_dim, layers, rng);
        p.merge = make_linear<T>(2 * hidden_dim, hidden_dim, rng);
    }
    return p;
}

template <typename T>
Var<T> recurrent_cell(const Var<T>& x, const Var<T>& h_prev, const RecurrentLayer<T>& layer) {
    return tanh_act(add_row_bias(add(matmul(x, layer.input_weight), matmul(h_prev, layer.hidden_weight)), layer.bias));
}

template <typename T>
Var<T> encode_text(const Var<T>& embedded, const RecurrentEncoderParams<T>& params, Rng* rng) {
    if (embedded.value().rank() != 2) throw ShapeError("encode_text: expected n x k, got " + shape_str(embedded.dims()));
    const std::size_t in = params.layers.front().input_weight.value().rows();
    if (embedded.value().cols() != in) {
        throw ShapeError("encode_text: input width " + std::to_string(embedded.value().cols()) +
                         " but encoder expects " + std::to_string(in));
    }
    auto forward = run_stack(embedded, params.layers, params.dropout, params.residual, rng);
    if (!params.bidirectional) return forward;
    auto backward_states = reverse_rows(run_stack(reverse_rows(embedded), params.reverse_layers, params.dropout, params.residual, rng));
    return apply(*params.merge, concat_cols(forward, backward_states));
}

template <typename T>
std::size_t BackboneParams<T>::total_stride() const {
    std::size_t s = 1;
    for (auto v : strides) s *= v;
    return s;
}

template <typename T>
std::vector<Var<T>> BackboneParams<T>::parameters() const {
    std::vector<Var<T>> out;
    for (const auto& l : layers) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

template <typename T>
BackboneParams<T> make_toy_backbone(std::size_t in_channels, std::vector<std::size_t> strides,
                                    std::vector<std::size_t> channels, Rng& rng) {
    if (strides.empty() || strides.size() != channels.size()) {
        throw ConfigError("backbone needs one channel count per strided layer");
    }
    BackboneParams<T> p;
    std::size_t in = in_channels;
    for (std::size_t i = 0; i < strides.size(); ++i) {
        if (strides[i] == 0 || channels[i] == 0) throw ConfigError("backbone strides and channels must be positive");
        p.layers.push_back(make_linear<T>(strides[i] * strides[i] * in, channels[i], rng));
        in = channels[i];
    }
    p.strides = std::move(strides);
    return p;
}

template <typename T>
Var<T> toy_visual_backbone(const Var<T>& image, const BackboneParams<T>& params) {
    if (image.value().rank() != 3) throw ShapeError("backbone: expected {H, W, C}, got " + shape_str(image.dims()));
    const std::size_t total = params.total_stride();
    if (image.dims()[0] % total != 0 || image.dims()[1] % total != 0) {
        throw ShapeError("backbone: image " + shape_str(image.dims()) + " not divisible by stride " +
                         std::to_string(total));
    }
    Var<T> x = image;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const std::size_t H = x.dims()[0], W = x.dims()[1], C = x.dims()[2], s = params.strides[li];
        const std::size_t h = H / s, w = W / s;
        // im2col over non-overlapping s x s patches.
        std::vector<std::size_t> idx;
        idx.reserve(H * W * C);
        for (std::size_t py = 0; py < h; ++py)
            for (std::size_t px = 0; px < w; ++px)
                for (std::size_t dy = 0; dy < s; ++dy)
                    for (std::size_t dx = 0; dx < s; ++dx)
                        for (std::size_t c = 0; c < C; ++c) idx.push_back(((py * s + dy) * W + px * s + dx) * C + c);
        auto patches = gather(x, std::move(idx), Shape{h * w, s * s * C});
        auto out = relu(apply(params.layers[li], patches));
        x = reshape(out, Shape{h, w, params.layers[li].out_dim()});
    }
    return x;
}

#define VSE_INSTANTIATE_ENCODERS(T)                                                                           \
    template struct SpatialFeatureMap<T>;                                                                     \
    template struct RecurrentEncoderParams<T>;                                                                \
    template struct BackboneParams<T>;                                                                        \
    template Tensor<T> flatten_spatial(const SpatialFeatureMap<T>&);                                          \
    template SpatialFeatureMap<T> unflatten_spatial(const Tensor<T>&, std::size_t, std::size_t);              \
    template Var<T> flatten_spatial(const Var<T>&);                                                           \
    template SpatialFeatureMap<T> adapt_features(const SpatialFeatureMap<T>&, const LinearParams<T>&);        \
    template Var<T> adapt_features(const Var<T>&, const LinearParams<T>&);                                    \
    template Var<T> lookup_embeddings(const TokenSequence&, const Var<T>&);                                   \
    template RecurrentEncoderParams<T> make_recurrent_encoder<T>(std::size_t, std::size_t, std::size_t, double, \
                                                                 bool, Rng&);                                 \
    template Var<T> recurrent_cell(const Var<T>&, const Var<T>&, const RecurrentLayer<T>&);                   \
    template Var<T> encode_text(const Var<T>&, const RecurrentEncoderParams<T>&, Rng*);                       \
    template BackboneParams<T> make_toy_backbone<T>(std::size_t, std::vector<std::size_t>,                    \
                                                    std::vector<std::size_t>, Rng&);                          \
    template Var<T> toy_visual_backbone(const Var<T>&, const BackboneParams<T>&);

VSE_INSTANTIATE_ENCODERS(float)
VSE_INSTANTIATE_ENCODERS(double)

}  // namespace vse
