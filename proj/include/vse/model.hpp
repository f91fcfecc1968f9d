#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vse/attention.hpp"
#include "vse/config.hpp"
#include "vse/encoders.hpp"

namespace vse {

template <typename T>
struct NamedParameter {
    std::string name;
    std::string group;
    Var<T> var;
};

// Two-path embedding network: image and text encoders, each followed by its own
// multi-head attention pooling and joint projection.
template <typename T>
class Model {
   public:
    // `cfg` must have feature_channels and vocab_size resolved.
    Model(const ModelConfig& cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    // raw: {h, w, c} feature map, or an {H, W, C} raster when the backbone is enabled.
    EncodedItem<T> encode_image(const Tensor<T>& raw, Rng* rng = nullptr) const;
    EncodedItem<T> encode_text(const TokenSequence& tokens, Rng* rng = nullptr) const;

    // Pre-attention image features (l x d) and text features (n x d).
    Var<T> image_features(const Tensor<T>& raw) const;
    Var<T> text_features(const TokenSequence& tokens, Rng* rng = nullptr) const;

    std::vector<NamedParameter<T>> parameters() const;

    std::optional<BackboneParams<T>> backbone;
    LinearParams<T> adapter;
    AttentionParams<T> image_attention;
    ProjectionParams<T> image_projection;
    Var<T> word_table;
    RecurrentEncoderParams<T> text_encoder;
    AttentionParams<T> text_attention;
    ProjectionParams<T> text_projection;

   private:
    ModelConfig cfg_;
};

// Copies parameter values between models with identical configs and parameter order.
template <typename To, typename From>
void copy_parameters(const Model<From>& from, Model<To>& to);

}  // namespace vse
