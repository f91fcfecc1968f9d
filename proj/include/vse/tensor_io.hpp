#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vse/tensor.hpp"

namespace vse {

// Binary tensor container:
//   "MHT1" | dtype u8 (0 = f32 LE) | rank u8 | rank x u32 LE dims | row-major payload
inline constexpr char kTensorMagic[4] = {'M', 'H', 'T', '1'};
inline constexpr std::uint8_t kDtypeF32 = 0;

std::vector<std::uint8_t> encode_tensor(const Tensor<float>& t);
// Validates the whole buffer before building the tensor; throws FormatError on any defect.
Tensor<float> decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::string& path, const Tensor<float>& t);
Tensor<float> read_tensor(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace vse
