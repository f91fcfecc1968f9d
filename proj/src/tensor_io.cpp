#include "vse/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace vse {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor<float>& t) {
    if (t.rank() > 255) throw ShapeError("tensor rank " + std::to_string(t.rank()) + " does not fit the file format");
    if (!t.all_finite()) throw NumericError("refusing to write a tensor with non-finite values");
    std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
    out.push_back(kDtypeF32);
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.dims()) {
        if (d > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("dimension too large for the file format");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    out.reserve(out.size() + 4 * t.size());
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Tensor<float> decode_tensor(std::span<const std::uint8_t> b) {
    if (b.size() < 4) throw FormatError("truncated header: missing magic", b.size());
    if (std::memcmp(b.data(), kTensorMagic, 4) != 0) throw FormatError("bad magic, expected MHT1", 0);
    if (b.size() < 6) throw FormatError("truncated header: missing dtype or rank", b.size());
    if (b[4] != kDtypeF32) throw FormatError("unsupported dtype code " + std::to_string(b[4]), 4);
    const std::size_t rank = b[5];
    std::size_t off = 6;
    Shape dims;
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        if (b.size() < off + 4) throw FormatError("truncated header: missing dimension " + std::to_string(i), b.size());
        const std::size_t d = get_u32(b, off);
        if (d == 0) throw FormatError("dimension " + std::to_string(i) + " is zero", off);
        if (count > std::numeric_limits<std::size_t>::max() / 4 / d) {
            throw FormatError("dimension overflow: element count exceeds addressable size", off);
        }
        count *= d;
        dims.push_back(d);
        off += 4;
    }
    const std::size_t payload = count * 4;
    if (payload > b.size() - off) {
        throw FormatError("truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                              std::to_string(b.size() - off),
                          b.size());
    }
    if (payload < b.size() - off) throw FormatError("trailing bytes after payload", off + payload);
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(get_u32(b, off + 4 * i));
        if (!std::isfinite(data[i])) throw FormatError("non-finite value in payload", off + 4 * i);
    }
    return Tensor<float>(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failed for " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path);
}

void write_tensor(const std::string& path, const Tensor<float>& t) { write_file_bytes(path, encode_tensor(t)); }

Tensor<float> read_tensor(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_tensor(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.detail, e.offset);
    }
}

}  // namespace vse
