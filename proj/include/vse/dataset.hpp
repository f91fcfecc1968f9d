#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vse/encoders.hpp"
#include "vse/tensor.hpp"

namespace vse {

enum class Split { train, val, test };

std::string split_name(Split s);
std::optional<Split> parse_split(const std::string& s);

struct ImageSize {
    std::size_t width = 0;
    std::size_t height = 0;
};

struct DatasetItem {
    std::string id;
    Split split = Split::train;
    std::string feature_path;            // as written in the manifest
    std::vector<TokenSequence> captions;
    std::optional<ImageSize> image_size;  // declared source image size, if any
    Tensor<float> features;               // {h, w, c}
};

struct Dataset {
    std::vector<DatasetItem> items;
    std::size_t vocab_size = 0;  // from "@vocab N", else max token + 1

    std::vector<const DatasetItem*> select(Split s) const;
    std::vector<const DatasetItem*> select(std::initializer_list<Split> splits) const;
};

// Manifest format, one item per line, tab-separated:
//   <id> <split> <feature file> <captions> [<W>x<H>]
// captions are '|'-separated lists of space-separated token indices. Feature paths are
// relative to the manifest's directory unless absolute. Lines starting with '#' are
// comments; "@vocab N" declares the vocabulary size.
Dataset load_dataset(const std::string& manifest_path);

std::string format_manifest_item(const DatasetItem& item);

}  // namespace vse
