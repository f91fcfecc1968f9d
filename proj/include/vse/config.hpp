#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vse/loss.hpp"

namespace vse {

enum class VisualInput { features, raster };

// Architecture and regularization hyperparameters. Dimensions left at 0 are inferred from
// the dataset when a model is first built.
struct ModelConfig {
    VisualInput visual_input = VisualInput::features;
    std::size_t feature_channels = 0;  // c: raw visual channels (0 = infer)
    std::size_t model_dim = 64;        // d
    std::size_t attention_hidden = 32; // d_a
    std::size_t heads = 4;             // r
    std::size_t joint_dim = 128;       // d'
    std::size_t word_dim = 64;         // k
    std::size_t vocab_size = 0;        // 0 = infer
    std::size_t rnn_layers = 4;
    double rnn_dropout = 0.25;
    double attention_dropout = 0.5;
    double projection_dropout = 0.5;
    bool bidirectional = false;
    bool rnn_residual = true;  // skip connections around layers 2..L of the text stack
    std::vector<std::size_t> backbone_strides{2, 2};
    std::vector<std::size_t> backbone_channels{16, 32};
};

struct StageSpec {
    std::vector<std::string> groups;
    std::size_t epochs = 1;
    double lr = 1e-3;
};

struct StagePlan {
    std::vector<StageSpec> stages;

    // Projection -> text encoder -> rest of the image path, 4/15/40 epochs, lr x0.1 per stage.
    static StagePlan paper();
    // Same unfreezing order at desk scale: 5/15/30 epochs, lr 0.005, 0.005, 0.0005.
    static StagePlan desk();
    static StagePlan named(const std::string& preset);
};

struct TrainRunConfig {
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::string stage_preset = "desk";
    StagePlan plan = StagePlan::desk();
    LossConfig loss;
    std::size_t eval_every = 1;  // epochs between validation passes (0 = only at the end)
    std::string manifest;
    std::string checkpoint_dir;
    std::string metrics_log;
};

struct RunConfig {
    ModelConfig model;
    TrainRunConfig train;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
// Applies one key = value pair to an existing config.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string format_config(const RunConfig& cfg);

std::vector<std::string> all_parameter_groups();

}  // namespace vse
