#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vse/dataset.hpp"

namespace vse {

// Synthetic paired data. Every item has a latent class and a few attributes; the visual
// map plants the class template at random cells and one attribute template per
// attribute cell, plus Gaussian noise everywhere. Captions name the class and the
// attributes (shuffled, padded with filler words). (class, attributes) combinations are
// unique per item whenever enough combinations exist.
//
// Token layout: 0 is reserved, 1..classes are class words, then the attribute words,
// then filler words.
struct SynthOptions {
    std::uint64_t seed = 7;
    std::size_t classes = 10;
    std::size_t items = 200;
    std::size_t grid_width = 4;
    std::size_t grid_height = 4;
    std::size_t vocab = 64;
    std::size_t channels = 16;
    double noise = 0.1;
    std::size_t captions_per_item = 5;
    std::size_t attributes_per_item = 2;
    std::size_t class_cells = 2;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    // 0: emit {h, w, channels} feature maps. s > 0: emit {h*s, w*s, 3} rasters for the
    // toy backbone, with s x s x 3 templates per cell.
    std::size_t raster_stride = 0;
};

struct SynthItemInfo {
    std::size_t cls = 0;
    std::vector<std::size_t> attributes;
    std::vector<std::size_t> class_cells;
    std::vector<std::size_t> attribute_cells;
};

struct SynthDataset {
    Dataset dataset;
    std::vector<SynthItemInfo> info;
    std::vector<Tensor<float>> class_templates;
    std::vector<Tensor<float>> attribute_templates;

    std::size_t attribute_count() const { return attribute_templates.size(); }
};

std::size_t synth_attribute_count(const SynthOptions& opt);
std::size_t synth_class_token(std::size_t cls);
std::size_t synth_attribute_token(const SynthOptions& opt, std::size_t attr);

SynthDataset generate_synthetic(const SynthOptions& opt);

// Writes <dir>/manifest.txt and <dir>/features/<id>.mht; returns the manifest path.
std::string write_synthetic(const SynthDataset& data, const std::string& dir);

}  // namespace vse
