#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vse/config.hpp"
#include "vse/dataset.hpp"
#include "vse/model.hpp"
#include "vse/retrieval.hpp"

namespace vse {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamSlot {
    Tensor<T> m;
    Tensor<T> v;
    std::size_t t = 0;  // updates applied to this parameter
};

template <typename T>
struct OptimizerState {
    std::vector<AdamSlot<T>> slots;
    std::size_t step = 0;  // calls to adam_step
};

template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const Var<T>> params);

// Bias-corrected Adam. Parameters whose `trainable` flag is false are left untouched
// together with their moments and counters. An empty mask trains everything.
template <typename T>
void adam_step(std::span<Var<T>> params, std::span<const Tensor<T>> grads, OptimizerState<T>& state, double lr,
               const std::vector<bool>& trainable = {}, const AdamHyper& hyper = {});

struct StageSchedule {
    std::vector<std::string> groups;
    std::vector<bool> trainable;  // one flag per model parameter
    double lr = 0;
    std::size_t epochs = 0;
};

template <typename T>
std::vector<StageSchedule> apply_stage_plan(const std::vector<NamedParameter<T>>& params, const StagePlan& plan);

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based, across stages
    std::size_t stage = 0;  // 1-based
    double lr = 0;
    double total = 0;       // batch means over the epoch
    double triplet = 0;
    double diversity = 0;
    bool evaluated = false;
    double val_r1_sentence = 0;
    double val_r1_image = 0;
    double val_diversity = 0;  // mean per-item diversity loss on the validation items

    std::string csv() const;
    static std::string csv_header();
};

using BatchPair = std::pair<std::size_t, std::size_t>;  // (item index, caption index)

// One epoch visits every (image, caption) pair once. It runs in rounds: each round is a
// shuffled pass over the images, each paired with one of its not-yet-used captions, so
// no image appears twice in a batch. A trailing singleton joins the previous batch.
std::vector<std::vector<BatchPair>> epoch_batches(const std::vector<const DatasetItem*>& items, std::size_t batch_size,
                                                  Rng& rng);

// Fills dataset-dependent dims (feature channels, vocabulary) left at 0.
RunConfig resolve_config(RunConfig cfg, const Dataset& data);

struct TrainResult {
    RunConfig config;  // resolved
    Model<float> model;
    std::vector<EpochMetrics> metrics;
};

// Deterministic given the config seed. Writes the metrics log and the final checkpoint
// when their paths are set.
TrainResult train(const Dataset& data, const RunConfig& cfg, std::ostream* progress = nullptr);

// Evaluation-mode encoding (no dropout, no graph) of items and all their captions.
struct EncodedItems {
    EmbeddingSet embeddings;
    std::vector<Tensor<double>> image_weights;  // M per item
    double mean_diversity = 0;                  // per-item diversity loss, pairing each image with its first caption
};

template <typename T>
EncodedItems encode_items(const Model<T>& model, std::span<const DatasetItem* const> items);

}  // namespace vse
