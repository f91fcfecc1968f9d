#include "vse/model.hpp"

namespace vse {

template <typename T>
Model<T>::Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.feature_channels == 0) throw ConfigError("model: feature_channels is not resolved");
    if (cfg.vocab_size == 0) throw ConfigError("model: vocab_size is not resolved");
    if (cfg.model_dim == 0 || cfg.word_dim == 0) throw ConfigError("model: dimensions must be positive");
    std::size_t visual_channels = cfg.feature_channels;
    if (cfg.visual_input == VisualInput::raster) {
        backbone = make_toy_backbone<T>(cfg.feature_channels, cfg.backbone_strides, cfg.backbone_channels, rng);
        visual_channels = backbone->out_channels();
    }
    adapter = make_linear<T>(visual_channels, cfg.model_dim, rng);
    image_attention = make_attention<T>(cfg.model_dim, cfg.attention_hidden, cfg.heads, Activation::relu,
                                        cfg.attention_dropout, rng);
    image_projection = make_projection<T>(cfg.heads, cfg.model_dim, cfg.joint_dim, cfg.projection_dropout, rng);
    word_table = parameter(uniform_init<T>(Shape{cfg.vocab_size, cfg.word_dim}, 1.0, rng));
    text_encoder = make_recurrent_encoder<T>(cfg.word_dim, cfg.model_dim, cfg.rnn_layers, cfg.rnn_dropout,
                                             cfg.bidirectional, rng);
    text_encoder.residual = cfg.rnn_residual;
    text_attention = make_attention<T>(cfg.model_dim, cfg.attention_hidden, cfg.heads, Activation::tanh,
                                       cfg.attention_dropout, rng);
    text_projection = make_projection<T>(cfg.heads, cfg.model_dim, cfg.joint_dim, cfg.projection_dropout, rng);
}

template <typename T>
Var<T> Model<T>::image_features(const Tensor<T>& raw) const {
    Var<T> map = constant(raw);
    if (backbone) map = toy_visual_backbone(map, *backbone);
    return flatten_spatial(adapt_features(map, adapter));
}

template <typename T>
Var<T> Model<T>::text_features(const TokenSequence& tokens, Rng* rng) const {
    return vse::encode_text(lookup_embeddings(tokens, word_table), text_encoder, rng);
}

template <typename T>
EncodedItem<T> Model<T>::encode_image(const Tensor<T>& raw, Rng* rng) const {
    return encode_item(image_features(raw), image_attention, image_projection, rng);
}

template <typename T>
EncodedItem<T> Model<T>::encode_text(const TokenSequence& tokens, Rng* rng) const {
    return encode_item(text_features(tokens, rng), text_attention, text_projection, rng);
}

template <typename T>
std::vector<NamedParameter<T>> Model<T>::parameters() const {
    std::vector<NamedParameter<T>> out;
    auto add = [&](std::string name, const std::string& group, const Var<T>& v) {
        out.push_back({group + "." + std::move(name), group, v});
    };
    if (backbone) {
        for (std::size_t i = 0; i < backbone->layers.size(); ++i) {
            add("conv" + std::to_string(i) + ".weight", "image_backbone", backbone->layers[i].weight);
            add("conv" + std::to_string(i) + ".bias", "image_backbone", backbone->layers[i].bias);
        }
    }
    add("weight", "image_adapter", adapter.weight);
    add("bias", "image_adapter", adapter.bias);
    add("hidden_weight", "image_attention", image_attention.hidden_weight);
    add("head_weight", "image_attention", image_attention.head_weight);
    add("weight", "image_projection", image_projection.layer.weight);
    add("bias", "image_projection", image_projection.layer.bias);
    add("table", "text_embedding", word_table);
    auto add_stack = [&](const std::string& prefix, const std::vector<RecurrentLayer<T>>& layers) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto p = prefix + std::to_string(i);
            add(p + ".input_weight", "text_encoder", layers[i].input_weight);
            add(p + ".hidden_weight", "text_encoder", layers[i].hidden_weight);
            add(p + ".bias", "text_encoder", layers[i].bias);
        }
    };
    add_stack("layer", text_encoder.layers);
    add_stack("reverse_layer", text_encoder.reverse_layers);
    if (text_encoder.merge) {
        add("merge.weight", "text_encoder", text_encoder.merge->weight);
        add("merge.bias", "text_encoder", text_encoder.merge->bias);
    }
    add("hidden_weight", "text_attention", text_attention.hidden_weight);
    add("head_weight", "text_attention", text_attention.head_weight);
    add("weight", "text_projection", text_projection.layer.weight);
    add("bias", "text_projection", text_projection.layer.bias);
    return out;
}

template <typename To, typename From>
void copy_parameters(const Model<From>& from, Model<To>& to) {
    auto src = from.parameters();
    auto dst = to.parameters();
    if (src.size() != dst.size()) throw ContractError("copy_parameters: models have different parameter counts");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name || src[i].var.dims() != dst[i].var.dims()) {
            throw ContractError("copy_parameters: parameter " + src[i].name + " does not match " + dst[i].name);
        }
        dst[i].var.mutable_value() = src[i].var.value().template cast<To>();
    }
}

template class Model<float>;
template class Model<double>;
template void copy_parameters(const Model<float>&, Model<double>&);
template void copy_parameters(const Model<double>&, Model<float>&);
template void copy_parameters(const Model<float>&, Model<float>&);
template void copy_parameters(const Model<double>&, Model<double>&);

}  // namespace vse
