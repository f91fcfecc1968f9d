#include "vse/synth.hpp"

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "vse/autograd.hpp"
#include "vse/tensor_io.hpp"

namespace vse {

namespace fs = std::filesystem;

std::size_t synth_attribute_count(const SynthOptions& opt) { return (opt.vocab - 1 - opt.classes) / 2; }
std::size_t synth_class_token(std::size_t cls) { return 1 + cls; }
std::size_t synth_attribute_token(const SynthOptions& opt, std::size_t attr) { return 1 + opt.classes + attr; }

namespace {

Tensor<float> random_template(Shape dims, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<float> t(std::move(dims));
    for (auto& v : t.values()) v = static_cast<float>(normal(rng));
    return t;
}

double combinations(std::size_t n, std::size_t k) {
    double c = 1;
    for (std::size_t i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    return c;
}

}  // namespace

SynthDataset generate_synthetic(const SynthOptions& opt) {
    if (opt.classes == 0 || opt.items == 0 || opt.grid_width == 0 || opt.grid_height == 0 || opt.channels == 0 ||
        opt.captions_per_item == 0 || opt.class_cells == 0) {
        throw ConfigError("synth: counts and sizes must be positive");
    }
    const std::size_t attrs = synth_attribute_count(opt);
    if (opt.vocab < opt.classes + 3 || attrs < opt.attributes_per_item) {
        throw ConfigError("synth: vocabulary of " + std::to_string(opt.vocab) + " is too small for " +
                          std::to_string(opt.classes) + " classes and " + std::to_string(opt.attributes_per_item) +
                          " attributes per item");
    }
    const std::size_t fillers = opt.vocab - 1 - opt.classes - attrs;
    const std::size_t cells = opt.grid_width * opt.grid_height;
    if (opt.class_cells + opt.attributes_per_item > cells) throw ConfigError("synth: grid too small for the planted objects");
    if (opt.noise < 0) throw ConfigError("synth: noise must be non-negative");

    Rng rng(opt.seed);
    const bool raster = opt.raster_stride > 0;
    const std::size_t s = opt.raster_stride;
    const Shape cell_dims = raster ? Shape{s, s, 3} : Shape{opt.channels};
    const std::size_t cell_size = shape_size(cell_dims);

    SynthDataset out;
    for (std::size_t c = 0; c < opt.classes; ++c) out.class_templates.push_back(random_template(cell_dims, rng));
    for (std::size_t a = 0; a < attrs; ++a) out.attribute_templates.push_back(random_template(cell_dims, rng));
    out.dataset.vocab_size = opt.vocab;

    const std::size_t n_test = static_cast<std::size_t>(std::lround(opt.test_fraction * double(opt.items)));
    const std::size_t n_val = static_cast<std::size_t>(std::lround(opt.val_fraction * double(opt.items)));
    if (n_test + n_val >= opt.items) throw ConfigError("synth: no items left for training");
    const std::size_t n_train = opt.items - n_test - n_val;

    const bool can_be_unique = combinations(attrs, opt.attributes_per_item) * double(opt.classes) >= double(opt.items);
    std::set<std::vector<std::size_t>> seen;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_class(0, opt.classes - 1);
    std::uniform_int_distribution<std::size_t> pick_filler_count(1, 3);
    std::uniform_int_distribution<std::size_t> pick_filler(0, fillers == 0 ? 0 : fillers - 1);

    for (std::size_t i = 0; i < opt.items; ++i) {
        SynthItemInfo info;
        std::vector<std::size_t> attr_pool(attrs);
        for (int attempt = 0;; ++attempt) {
            info.cls = pick_class(rng);
            std::iota(attr_pool.begin(), attr_pool.end(), 0);
            std::shuffle(attr_pool.begin(), attr_pool.end(), rng);
            info.attributes.assign(attr_pool.begin(), attr_pool.begin() + opt.attributes_per_item);
            std::sort(info.attributes.begin(), info.attributes.end());
            std::vector<std::size_t> key{info.cls};
            key.insert(key.end(), info.attributes.begin(), info.attributes.end());
            if (!can_be_unique || attempt > 10000 || seen.insert(key).second) break;
        }
        std::vector<std::size_t> order(cells);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        info.class_cells.assign(order.begin(), order.begin() + opt.class_cells);
        info.attribute_cells.assign(order.begin() + opt.class_cells,
                                    order.begin() + opt.class_cells + opt.attributes_per_item);

        // Cell contents, then noise.
        std::vector<const Tensor<float>*> content(cells, nullptr);
        for (auto c : info.class_cells) content[c] = &out.class_templates[info.cls];
        for (std::size_t a = 0; a < info.attributes.size(); ++a)
            content[info.attribute_cells[a]] = &out.attribute_templates[info.attributes[a]];

        const std::size_t gw = opt.grid_width, gh = opt.grid_height;
        Tensor<float> features = raster ? Tensor<float>(Shape{gh * s, gw * s, 3}) : Tensor<float>(Shape{gh, gw, opt.channels});
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const std::size_t cx = cell % gw, cy = cell / gw;
            for (std::size_t j = 0; j < cell_size; ++j) {
                const double base = content[cell] ? (*content[cell])[j] : 0.0;
                const float v = static_cast<float>(base + opt.noise * normal(rng));
                if (raster) {
                    const std::size_t dy = j / (s * 3), dx = (j / 3) % s, ch = j % 3;
                    features[((cy * s + dy) * gw * s + cx * s + dx) * 3 + ch] = v;
                } else {
                    features[cell * opt.channels + j] = v;
                }
            }
        }

        DatasetItem item;
        char id[32];
        std::snprintf(id, sizeof id, "item%04zu", i);
        item.id = id;
        item.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
        item.feature_path = "features/" + item.id + ".mht";
        if (!raster) item.image_size = ImageSize{gw * 32, gh * 32};
        for (std::size_t c = 0; c < opt.captions_per_item; ++c) {
            TokenSequence tokens{synth_class_token(info.cls)};
            for (auto a : info.attributes) tokens.push_back(synth_attribute_token(opt, a));
            if (fillers > 0) {
                const std::size_t nf = pick_filler_count(rng);
                for (std::size_t f = 0; f < nf; ++f) tokens.push_back(1 + opt.classes + attrs + pick_filler(rng));
            }
            std::shuffle(tokens.begin(), tokens.end(), rng);
            item.captions.push_back(std::move(tokens));
        }
        item.features = std::move(features);
        out.dataset.items.push_back(std::move(item));
        out.info.push_back(std::move(info));
    }
    return out;
}

std::string write_synthetic(const SynthDataset& data, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "features");
    const auto manifest = (fs::path(dir) / "manifest.txt").string();
    std::ofstream f(manifest, std::ios::trunc);
    if (!f) throw IoError("cannot open " + manifest + " for writing");
    f << "# synthetic dataset: id, split, features, captions[, source size]\n";
    f << "@vocab " << data.dataset.vocab_size << "\n";
    for (const auto& item : data.dataset.items) {
        write_tensor((fs::path(dir) / item.feature_path).string(), item.features);
        f << format_manifest_item(item) << "\n";
    }
    if (!f) throw IoError("write failed for " + manifest);
    return manifest;
}

}  // namespace vse
