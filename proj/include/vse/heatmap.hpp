#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vse/attention.hpp"

namespace vse {

// 8-bit binary PGM (P5). Values are min-max normalized per raster; a constant raster
// becomes all zeros.
std::vector<std::uint8_t> encode_pgm(const Raster& raster);
void write_heatmap(const Raster& raster, const std::string& path);

// One heatmap per attention row (r x l weights on a w x h grid), upsampled to
// out_width x out_height. Files are named <prefix>_head<i>.pgm; returns their paths.
std::vector<std::string> export_attention_heatmaps(const Tensor<double>& weights, std::size_t w, std::size_t h,
                                                   std::size_t out_width, std::size_t out_height,
                                                   const std::string& dir, const std::string& prefix);

}  // namespace vse
