#include "vse/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "vse/tensor_io.hpp"

namespace vse {

std::vector<std::uint8_t> encode_pgm(const Raster& raster) {
    if (raster.width == 0 || raster.height == 0 || raster.pixels.size() != raster.width * raster.height) {
        throw ShapeError("heatmap raster is empty or inconsistent");
    }
    const std::string header =
        "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto [lo, hi] = std::minmax_element(raster.pixels.begin(), raster.pixels.end());
    const double span = *hi - *lo;
    for (double v : raster.pixels) {
        const double scaled = span > 0 ? 255.0 * (v - *lo) / span : 0.0;
        out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(scaled), 0L, 255L)));
    }
    return out;
}

void write_heatmap(const Raster& raster, const std::string& path) { write_file_bytes(path, encode_pgm(raster)); }

std::vector<std::string> export_attention_heatmaps(const Tensor<double>& weights, std::size_t w, std::size_t h,
                                                   std::size_t out_width, std::size_t out_height,
                                                   const std::string& dir, const std::string& prefix) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> paths;
    const std::size_t l = weights.cols();
    for (std::size_t head = 0; head < weights.rows(); ++head) {
        std::span<const double> row(weights.values().data() + head * l, l);
        const auto path = (std::filesystem::path(dir) / (prefix + "_head" + std::to_string(head) + ".pgm")).string();
        write_heatmap(attention_to_heatmap(row, w, h, out_width, out_height), path);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace vse
