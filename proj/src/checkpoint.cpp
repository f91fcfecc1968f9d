#include "vse/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "vse/tensor_io.hpp"

namespace vse {

namespace fs = std::filesystem;

void save_checkpoint(const std::string& dir, const Model<float>& model, const RunConfig& cfg) {
    fs::create_directories(dir);
    {
        const auto path = (fs::path(dir) / "config.txt").string();
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot write " + path);
        // Output locations are not part of the trained state; copies of a run stay byte-identical.
        RunConfig stored = cfg;
        stored.train.checkpoint_dir.clear();
        stored.train.metrics_log.clear();
        f << format_config(stored);
        if (!f) throw IoError("write failed for " + path);
    }
    for (const auto& p : model.parameters()) write_tensor((fs::path(dir) / (p.name + ".mht")).string(), p.var.value());
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    auto cfg = load_config((fs::path(dir) / "config.txt").string());
    Rng rng(cfg.train.seed);
    Model<float> model(cfg.model, rng);
    for (auto& p : model.parameters()) {
        const auto path = (fs::path(dir) / (p.name + ".mht")).string();
        auto t = read_tensor(path);
        if (t.dims() != p.var.dims()) {
            throw FormatError(path + ": dims " + shape_str(t.dims()) + " do not match parameter " + shape_str(p.var.dims()), 6);
        }
        p.var.mutable_value() = std::move(t);
    }
    return {std::move(cfg), std::move(model)};
}

}  // namespace vse
