#pragma once

// Parameter checkpoints.
//
// Layout (all integers unsigned 64-bit little-endian, values IEEE-754
// binary64 little-endian):
//
//   magic    8 bytes  "FENCKPT1"
//   count    u64
//   count x { name_len u64, name bytes, rank u64, dims u64[rank], values f64[prod(dims)] }
//
// Entries keep the order in which they were written.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tensor.hpp"

namespace fen {

struct NamedTensor {
    std::string name;
    Tensor value;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'F', 'E', 'N', 'C', 'K', 'P', 'T', '1'};

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw DataError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedTensor>& entries) {
    std::string out(detail::kCheckpointMagic, 8);
    detail::put_u64(out, entries.size());
    for (const auto& e : entries) {
        detail::put_u64(out, e.name.size());
        out += e.name;
        detail::put_u64(out, e.value.shape().size());
        for (auto d : e.value.shape()) detail::put_u64(out, d);
        for (double v : e.value.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

inline std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0) {
        throw DataError("not a checkpoint (bad magic)");
    }
    std::size_t pos = 8;
    const auto count = detail::get_u64(bytes, pos);
    std::vector<NamedTensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = detail::get_u64(bytes, pos);
        if (pos + len > bytes.size()) throw DataError("checkpoint truncated");
        std::string name = bytes.substr(pos, len);
        pos += len;
        const auto rank = detail::get_u64(bytes, pos);
        Shape shape(rank);
        for (auto& d : shape) d = detail::get_u64(bytes, pos);
        std::vector<double> values(shape_size(shape));
        for (auto& v : values) v = std::bit_cast<double>(detail::get_u64(bytes, pos));
        out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
    }
    if (pos != bytes.size()) throw DataError("trailing bytes after checkpoint");
    return out;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path);
    const auto bytes = encode_checkpoint(entries);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace fen
