// vse: synthetic data, training, retrieval evaluation, attention export, gradient checks.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "vse/checkpoint.hpp"
#include "vse/errors.hpp"
#include "vse/gradient_suite.hpp"
#include "vse/heatmap.hpp"
#include "vse/synth.hpp"
#include "vse/training.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> heads;
    std::optional<double> lambda;
    std::optional<std::string> stage_preset;
    std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key = value configuration file");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--heads", f.heads, "attention heads r");
    cmd->add_option("--lambda", f.lambda, "diversity regularization weight");
    cmd->add_option("--stage-preset", f.stage_preset, "training schedule")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--set", f.overrides, "extra key=value overrides")->take_all();
}

vse::RunConfig build_config(const CommonFlags& f) {
    vse::RunConfig cfg = f.config.empty() ? vse::RunConfig{} : vse::load_config(f.config);
    for (const auto& kv : f.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw vse::ConfigError("--set expects key=value, got '" + kv + "'");
        vse::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.stage_preset) vse::set_config_value(cfg, "stage_preset", *f.stage_preset);
    if (f.seed) cfg.train.seed = *f.seed;
    if (f.heads) vse::set_config_value(cfg, "heads", std::to_string(*f.heads));
    if (f.lambda) {
        if (*f.lambda < 0) throw vse::ConfigError("--lambda must be non-negative");
        cfg.train.loss.diversity_weight = *f.lambda;
    }
    return cfg;
}

std::vector<const vse::DatasetItem*> select_split(const vse::Dataset& data, const std::string& split) {
    if (split == "all") return data.select({vse::Split::train, vse::Split::val, vse::Split::test});
    return data.select(*vse::parse_split(split));
}

int run_synth(const std::string& out, vse::SynthOptions opt, const std::string& grid) {
    const auto x = grid.find('x');
    if (x == std::string::npos) throw vse::ConfigError("--grid expects WxH, got '" + grid + "'");
    opt.grid_width = std::stoul(grid.substr(0, x));
    opt.grid_height = std::stoul(grid.substr(x + 1));
    const auto data = vse::generate_synthetic(opt);
    const auto manifest = vse::write_synthetic(data, out);
    std::cout << "wrote " << data.dataset.items.size() << " items to " << manifest << "\n";
    return 0;
}

int run_train(const CommonFlags& flags, const std::string& manifest, const std::string& checkpoint,
              const std::string& metrics, bool quiet) {
    auto cfg = build_config(flags);
    if (!manifest.empty()) cfg.train.manifest = manifest;
    if (!checkpoint.empty()) cfg.train.checkpoint_dir = checkpoint;
    if (!metrics.empty()) cfg.train.metrics_log = metrics;
    if (cfg.train.manifest.empty()) throw vse::ConfigError("no manifest: set 'manifest' in the config or pass --manifest");
    if (!flags.config.empty() && fs::path(cfg.train.manifest).is_relative() && manifest.empty()) {
        cfg.train.manifest = (fs::path(flags.config).parent_path() / cfg.train.manifest).string();
    }
    const auto data = vse::load_dataset(cfg.train.manifest);
    if (!quiet) std::cout << vse::EpochMetrics::csv_header() << "\n";
    const auto result = vse::train(data, cfg, quiet ? nullptr : &std::cout);
    if (!cfg.train.checkpoint_dir.empty()) std::cout << "checkpoint: " << cfg.train.checkpoint_dir << "\n";
    return result.metrics.empty() ? 1 : 0;
}

int run_eval(const std::string& checkpoint, const std::string& manifest, const std::string& split, std::size_t fold,
             bool csv) {
    const auto ck = vse::load_checkpoint(checkpoint);
    const auto data = vse::load_dataset(manifest);
    const auto items = select_split(data, split);
    if (items.empty()) throw vse::ContractError("no items in split '" + split + "'");
    const auto enc = vse::encode_items(ck.model, std::span<const vse::DatasetItem* const>(items));
    const auto report = vse::evaluate_protocol(enc.embeddings, fold);
    if (csv) {
        std::cout << vse::format_report_csv(report, split);
    } else {
        std::cout << vse::format_report_table(report);
        std::cout << "mean diversity loss: " << enc.mean_diversity << "\n";
    }
    return 0;
}

int run_export(const std::string& checkpoint, const std::string& manifest, const std::vector<std::string>& ids,
               const std::string& out) {
    const auto ck = vse::load_checkpoint(checkpoint);
    const auto data = vse::load_dataset(manifest);
    const std::size_t stride = ck.model.backbone ? ck.model.backbone->total_stride() : 1;
    for (const auto& id : ids) {
        const vse::DatasetItem* item = nullptr;
        for (const auto& it : data.items) {
            if (it.id == id) item = &it;
        }
        if (!item) throw vse::ContractError("no item with id '" + id + "' in " + manifest);
        const std::vector<const vse::DatasetItem*> one{item};
        const auto enc = vse::encode_items(ck.model, std::span<const vse::DatasetItem* const>(one));
        const std::size_t w = item->features.dim(1) / stride;
        const std::size_t h = item->features.dim(0) / stride;
        std::size_t out_w = w * 32, out_h = h * 32;
        if (item->image_size) {
            out_w = item->image_size->width;
            out_h = item->image_size->height;
        } else if (ck.model.backbone) {
            out_w = item->features.dim(1);
            out_h = item->features.dim(0);
        }
        for (const auto& p : vse::export_attention_heatmaps(enc.image_weights.front(), w, h, out_w, out_h, out, id)) {
            std::cout << p << "\n";
        }
    }
    return 0;
}

int run_gradcheck(std::uint64_t seed) {
    vse::GradientSuiteOptions opt;
    opt.seed = seed;
    const auto report = vse::run_gradient_suite(opt);
    for (const auto& c : report.cases) {
        std::printf("%-34s %-4s max rel err %.3e over %zu coords\n", c.name.c_str(), c.passed ? "ok" : "FAIL",
                    c.result.max_rel_error, c.result.coords_checked);
    }
    std::printf("max relative error %.3e (tolerance %.0e)\n", report.max_rel_error, report.tolerance);
    if (!report.passed()) throw vse::NumericError("gradient check failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-head attention visual-semantic embedding"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    std::string synth_out, grid = "4x4";
    vse::SynthOptions sopt;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", sopt.seed);
    synth->add_option("--classes", sopt.classes);
    synth->add_option("--items", sopt.items);
    synth->add_option("--grid", grid, "feature grid WxH");
    synth->add_option("--vocab", sopt.vocab);
    synth->add_option("--channels", sopt.channels);
    synth->add_option("--noise", sopt.noise);
    synth->add_option("--captions", sopt.captions_per_item);
    synth->add_option("--raster-stride", sopt.raster_stride, "emit rasters for the toy backbone");

    auto* train = app.add_subcommand("train", "train a model from a manifest");
    CommonFlags train_flags;
    std::string train_manifest, train_checkpoint, train_metrics;
    bool quiet = false;
    add_common_flags(train, train_flags);
    train->add_option("--manifest", train_manifest);
    train->add_option("--checkpoint", train_checkpoint, "checkpoint directory");
    train->add_option("--metrics", train_metrics, "metrics CSV log (appended)");
    train->add_flag("--quiet", quiet);

    auto* eval = app.add_subcommand("eval", "retrieval recall for a checkpoint");
    std::string eval_checkpoint, eval_manifest, eval_split = "test";
    std::size_t fold = 0;
    bool csv = false;
    eval->add_option("--checkpoint", eval_checkpoint)->required();
    eval->add_option("--manifest", eval_manifest)->required();
    eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test", "all"}));
    eval->add_option("--fold", fold, "images per fold (0 = whole split)");
    eval->add_flag("--csv", csv);

    auto* exporter = app.add_subcommand("export-attention", "write per-head attention heatmaps");
    std::string ex_checkpoint, ex_manifest, ex_out;
    std::vector<std::string> ids;
    exporter->add_option("--checkpoint", ex_checkpoint)->required();
    exporter->add_option("--manifest", ex_manifest)->required();
    exporter->add_option("--ids", ids, "item ids")->required()->delimiter(',');
    exporter->add_option("--out", ex_out)->required();

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::uint64_t grad_seed = vse::GradientSuiteOptions{}.seed;
    grad->add_option("--seed", grad_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "[usage] " << e.what() << "\n";
        return 2;
    }

    try {
        if (*synth) return run_synth(synth_out, sopt, grid);
        if (*train) return run_train(train_flags, train_manifest, train_checkpoint, train_metrics, quiet);
        if (*eval) return run_eval(eval_checkpoint, eval_manifest, eval_split, fold, csv);
        if (*exporter) return run_export(ex_checkpoint, ex_manifest, ids, ex_out);
        if (*grad) return run_gradcheck(grad_seed);
    } catch (const vse::Error& e) {
        std::cerr << "[" << e.category() << "] " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "[internal] " << e.what() << "\n";
        return 3;
    }
    return 1;
}
