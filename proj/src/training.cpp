#include "vse/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "vse/checkpoint.hpp"
#include "vse/loss.hpp"

namespace vse {

template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const Var<T>> params) {
    OptimizerState<T> s;
    for (const auto& p : params) s.slots.push_back({Tensor<T>(p.dims()), Tensor<T>(p.dims()), 0});
    return s;
}

template <typename T>
void adam_step(std::span<Var<T>> params, std::span<const Tensor<T>> grads, OptimizerState<T>& state, double lr,
               const std::vector<bool>& trainable, const AdamHyper& hyper) {
    if (params.size() != grads.size() || params.size() != state.slots.size()) {
        throw ContractError("adam_step: parameter, gradient and state counts differ");
    }
    if (!trainable.empty() && trainable.size() != params.size()) throw ContractError("adam_step: mask size mismatch");
    if (!(lr > 0)) throw ContractError("adam_step: learning rate must be positive");
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].dims() != params[i].dims()) throw ShapeError("adam_step: gradient shape mismatch for parameter " + std::to_string(i));
        if (!grads[i].all_finite()) {
            throw NumericError("non-finite gradient for parameter " + std::to_string(i) + " at optimizer step " +
                               std::to_string(state.step));
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable.empty() && !trainable[i]) continue;
        auto& slot = state.slots[i];
        ++slot.t;
        const double c1 = 1.0 - std::pow(hyper.beta1, double(slot.t));
        const double c2 = 1.0 - std::pow(hyper.beta2, double(slot.t));
        auto& value = params[i].mutable_value();
        const auto& g = grads[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            slot.m[j] = static_cast<T>(hyper.beta1 * slot.m[j] + (1.0 - hyper.beta1) * g[j]);
            slot.v[j] = static_cast<T>(hyper.beta2 * slot.v[j] + (1.0 - hyper.beta2) * double(g[j]) * g[j]);
            const double mhat = slot.m[j] / c1;
            const double vhat = slot.v[j] / c2;
            value[j] = static_cast<T>(value[j] - lr * mhat / (std::sqrt(vhat) + hyper.eps));
        }
    }
}

template <typename T>
std::vector<StageSchedule> apply_stage_plan(const std::vector<NamedParameter<T>>& params, const StagePlan& plan) {
    if (plan.stages.empty()) throw ConfigError("stage plan has no stages");
    const auto known = all_parameter_groups();
    std::vector<StageSchedule> out;
    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
        const auto& st = plan.stages[s];
        if (st.epochs == 0) throw ConfigError("stage " + std::to_string(s + 1) + " has no epochs");
        if (!(st.lr > 0)) throw ConfigError("stage " + std::to_string(s + 1) + " has a non-positive learning rate");
        if (st.groups.empty()) throw ConfigError("stage " + std::to_string(s + 1) + " trains no parameter groups");
        for (const auto& g : st.groups) {
            if (std::find(known.begin(), known.end(), g) == known.end()) {
                throw ConfigError("stage " + std::to_string(s + 1) + ": unknown parameter group '" + g + "'");
            }
        }
        StageSchedule sched{st.groups, std::vector<bool>(params.size()), st.lr, st.epochs};
        for (std::size_t i = 0; i < params.size(); ++i) {
            sched.trainable[i] = std::find(st.groups.begin(), st.groups.end(), params[i].group) != st.groups.end();
        }
        out.push_back(std::move(sched));
    }
    return out;
}

std::string EpochMetrics::csv_header() {
    return "epoch,stage,lr,total_loss,triplet_loss,diversity_loss,val_r1_sentence,val_r1_image,val_diversity";
}

std::string EpochMetrics::csv() const {
    char buf[256];
    if (evaluated) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.8g,%.8f,%.8f,%.8f,%.4f,%.4f,%.8f", epoch, stage, lr, total, triplet,
                      diversity, val_r1_sentence, val_r1_image, val_diversity);
    } else {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.8g,%.8f,%.8f,%.8f,,,", epoch, stage, lr, total, triplet, diversity);
    }
    return buf;
}

RunConfig resolve_config(RunConfig cfg, const Dataset& data) {
    if (data.items.empty()) throw ContractError("dataset is empty");
    const auto& first = data.items.front().features;
    const std::size_t channels = first.dim(2);
    for (const auto& it : data.items) {
        if (it.features.rank() != 3 || it.features.dim(2) != channels) {
            throw ShapeError("item " + it.id + " has features " + shape_str(it.features.dims()) + ", expected " +
                             std::to_string(channels) + " channels");
        }
    }
    if (cfg.model.feature_channels == 0) cfg.model.feature_channels = channels;
    if (cfg.model.feature_channels != channels) {
        throw ConfigError("feature_channels = " + std::to_string(cfg.model.feature_channels) + " but the dataset has " +
                          std::to_string(channels));
    }
    if (cfg.model.vocab_size == 0) cfg.model.vocab_size = data.vocab_size;
    if (cfg.model.vocab_size < data.vocab_size) {
        throw ConfigError("vocab_size = " + std::to_string(cfg.model.vocab_size) + " is smaller than the dataset vocabulary " +
                          std::to_string(data.vocab_size));
    }
    return cfg;
}

template <typename T>
EncodedItems encode_items(const Model<T>& model, std::span<const DatasetItem* const> items) {
    NoGradGuard no_grad;
    EncodedItems out;
    const std::size_t d = model.config().joint_dim;
    std::vector<double> img, cap;
    double div_total = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto image = model.encode_image(items[i]->features.template cast<T>());
        for (T v : image.joint.value().values()) img.push_back(v);
        out.image_weights.push_back(image.weights.value().template cast<double>());
        for (std::size_t c = 0; c < items[i]->captions.size(); ++c) {
            const auto text = model.encode_text(items[i]->captions[c]);
            for (T v : text.joint.value().values()) cap.push_back(v);
            out.embeddings.caption_image.push_back(i);
            if (c == 0) div_total += double(diversity_loss(image.weights, text.weights).value().item());
        }
    }
    const std::size_t n_caps = out.embeddings.caption_image.size();
    if (items.empty() || n_caps == 0) throw ContractError("encode_items: nothing to encode");
    out.embeddings.images = Tensor<double>(Shape{items.size(), d}, std::move(img));
    out.embeddings.captions = Tensor<double>(Shape{n_caps, d}, std::move(cap));
    out.mean_diversity = div_total / double(items.size());
    return out;
}

std::vector<std::vector<BatchPair>> epoch_batches(const std::vector<const DatasetItem*>& items, std::size_t batch_size,
                                             Rng& rng) {
    std::vector<std::vector<std::size_t>> remaining(items.size());
    std::size_t rounds = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        remaining[i].resize(items[i]->captions.size());
        std::iota(remaining[i].begin(), remaining[i].end(), 0);
        std::shuffle(remaining[i].begin(), remaining[i].end(), rng);
        rounds = std::max(rounds, remaining[i].size());
    }
    std::vector<std::vector<BatchPair>> batches;
    for (std::size_t r = 0; r < rounds; ++r) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (r < remaining[i].size()) order.push_back(i);
        }
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t first = batches.size();
        for (std::size_t b = 0; b < order.size(); b += batch_size) {
            std::vector<BatchPair> batch;
            for (std::size_t j = b; j < std::min(order.size(), b + batch_size); ++j) {
                batch.emplace_back(order[j], remaining[order[j]][r]);
            }
            batches.push_back(std::move(batch));
        }
        if (batches.size() - first > 1 && batches.back().size() == 1) {
            batches[batches.size() - 2].push_back(batches.back().front());
            batches.pop_back();
        } else if (batches.size() - first == 1 && batches.back().size() == 1) {
            batches.pop_back();  // a lone pair has no negatives
        }
    }
    return batches;
}

TrainResult train(const Dataset& data, const RunConfig& cfg_in, std::ostream* progress) {
    const RunConfig cfg = resolve_config(cfg_in, data);
    const auto& tc = cfg.train;
    if (tc.batch_size < 2) throw ConfigError("batch size must be at least 2");
    const auto train_items = data.select(Split::train);
    if (train_items.size() < 2) throw ContractError("training needs at least 2 training items, found " + std::to_string(train_items.size()));
    const auto val_items = data.select(Split::val);

    Rng rng(tc.seed);
    Model<float> model(cfg.model, rng);
    const auto named = model.parameters();
    std::vector<Var<float>> vars;
    for (const auto& p : named) vars.push_back(p.var);
    auto state = make_optimizer_state<float>(vars);
    const auto schedule = apply_stage_plan(named, tc.plan);

    std::ofstream log;
    if (!tc.metrics_log.empty()) {
        const bool fresh = !std::filesystem::exists(tc.metrics_log) || std::filesystem::file_size(tc.metrics_log) == 0;
        log.open(tc.metrics_log, std::ios::app);
        if (!log) throw IoError("cannot open metrics log " + tc.metrics_log);
        if (fresh) log << EpochMetrics::csv_header() << "\n";
    }

    TrainResult result{cfg, model, {}};
    std::size_t epoch = 0;
    std::size_t total_epochs = 0;
    for (const auto& s : schedule) total_epochs += s.epochs;

    for (std::size_t si = 0; si < schedule.size(); ++si) {
        const auto& stage = schedule[si];
        for (std::size_t e = 0; e < stage.epochs; ++e) {
            ++epoch;
            EpochMetrics m;
            m.epoch = epoch;
            m.stage = si + 1;
            m.lr = stage.lr;
            const auto batches = epoch_batches(train_items, tc.batch_size, rng);
            for (const auto& batch : batches) {
                BatchEmbeddings<float> be;
                for (const auto& [idx, cap] : batch) {
                    const auto* item = train_items[idx];
                    auto image = model.encode_image(item->features, &rng);
                    auto text = model.encode_text(item->captions[cap], &rng);
                    be.images.push_back(image.joint);
                    be.image_weights.push_back(image.weights);
                    be.sentences.push_back(text.joint);
                    be.text_weights.push_back(text.weights);
                }
                auto loss = total_loss(be, tc.loss);
                const auto grads = gradients(loss.total, std::span<Var<float>>(vars));
                try {
                    adam_step(std::span<Var<float>>(vars), std::span<const Tensor<float>>(grads), state, stage.lr,
                              stage.trainable);
                } catch (const NumericError& err) {
                    throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(epoch) + ", stage " +
                                       std::to_string(si + 1) + ")");
                }
                m.total += loss.total.value().item();
                m.triplet += loss.triplet;
                m.diversity += loss.diversity;
            }
            const double nb = double(batches.size());
            m.total /= nb;
            m.triplet /= nb;
            m.diversity /= nb;
            const bool last = epoch == total_epochs;
            if (!val_items.empty() && ((tc.eval_every > 0 && epoch % tc.eval_every == 0) || last)) {
                const auto enc = encode_items(model, std::span<const DatasetItem* const>(val_items));
                const auto rep = evaluate_protocol(enc.embeddings, 0);
                m.evaluated = true;
                m.val_r1_sentence = rep.sentence.r1;
                m.val_r1_image = rep.image.r1;
                m.val_diversity = enc.mean_diversity;
            }
            if (log) log << m.csv() << "\n" << std::flush;
            if (progress) *progress << m.csv() << "\n" << std::flush;
            result.metrics.push_back(m);
        }
    }
    if (!tc.checkpoint_dir.empty()) save_checkpoint(tc.checkpoint_dir, model, cfg);
    return result;
}

#define VSE_INSTANTIATE_TRAINING(T)                                                                                 \
    template OptimizerState<T> make_optimizer_state(std::span<const Var<T>>);                                       \
    template void adam_step(std::span<Var<T>>, std::span<const Tensor<T>>, OptimizerState<T>&, double,             \
                            const std::vector<bool>&, const AdamHyper&);                                            \
    template std::vector<StageSchedule> apply_stage_plan(const std::vector<NamedParameter<T>>&, const StagePlan&); \
    template EncodedItems encode_items(const Model<T>&, std::span<const DatasetItem* const>);

VSE_INSTANTIATE_TRAINING(float)
VSE_INSTANTIATE_TRAINING(double)

}  // namespace vse
