// Binary coefficient file ("MCANC1").
//
//   offset  size  field
//   0       6     magic "MCANC1"
//   6       1     kind (0 = control filter, 1 = path matrix)
//   7       12    dim0, dim1, dim2 as little-endian u32
//   19      8*n   payload, little-endian f64, row-major, dim0 outermost
//
// The byte layout is fixed regardless of host endianness.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "mcanc/types.hpp"

namespace mcanc {

enum class CoefficientKind : std::uint8_t { ControlFilter = 0, PathMatrix = 1 };

using CoefficientTensor = std::variant<ControlFilterMatrix, PathMatrix>;

namespace detail {

inline constexpr std::array<char, 6> kMagic = {'M', 'C', 'A', 'N', 'C', '1'};
inline constexpr std::size_t kHeaderBytes = 6 + 1 + 3 * 4;

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline std::uint32_t to_u32(std::size_t v, const char* field) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError(std::string("coefficient file: ") + field + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline std::vector<unsigned char> encode_coefficients(CoefficientKind kind, const Tensor3& t) {
    std::vector<unsigned char> out;
    out.reserve(detail::kHeaderBytes + 8 * t.size());
    out.insert(out.end(), detail::kMagic.begin(), detail::kMagic.end());
    out.push_back(static_cast<unsigned char>(kind));
    detail::put_u32(out, detail::to_u32(t.dim0(), "dim0"));
    detail::put_u32(out, detail::to_u32(t.dim1(), "dim1"));
    detail::put_u32(out, detail::to_u32(t.dim2(), "dim2"));
    for (double v : t.values()) detail::put_f64(out, v);
    return out;
}

inline CoefficientTensor decode_coefficients(std::span<const unsigned char> bytes,
                                             std::size_t max_length = kDefaultMaxLength) {
    if (bytes.size() < detail::kHeaderBytes) {
        throw FormatError("coefficient file: header truncated (" + std::to_string(bytes.size()) +
                          " bytes)");
    }
    if (std::memcmp(bytes.data(), detail::kMagic.data(), detail::kMagic.size()) != 0) {
        throw FormatError("coefficient file: bad magic");
    }
    const auto kind_byte = bytes[6];
    if (kind_byte > 1) {
        throw FormatError("coefficient file: bad kind " + std::to_string(kind_byte));
    }
    const std::uint64_t d0 = detail::get_u32(bytes.data() + 7);
    const std::uint64_t d1 = detail::get_u32(bytes.data() + 11);
    const std::uint64_t d2 = detail::get_u32(bytes.data() + 15);
    const std::pair<const char*, std::uint64_t> dims[] = {{"dim0", d0}, {"dim1", d1}, {"dim2", d2}};
    for (const auto& [name, v] : dims) {
        if (v == 0) throw FormatError(std::string("coefficient file: ") + name + " is zero");
    }
    if (d2 > max_length) throw FormatError("coefficient file: dim2 exceeds maximum length");
    // Three u32 factors can overflow u64; bound the product by the bytes present.
    const std::uint64_t available = (bytes.size() - detail::kHeaderBytes) / 8;
    if (d0 > available || d1 > available || d0 * d1 > available || d0 * d1 * d2 > available) {
        throw FormatError("coefficient file: payload truncated for dims " + std::to_string(d0) +
                          "x" + std::to_string(d1) + "x" + std::to_string(d2));
    }
    const std::uint64_t count = d0 * d1 * d2;
    if (bytes.size() != detail::kHeaderBytes + 8 * count) {
        throw FormatError("coefficient file: payload length " +
                          std::to_string(bytes.size() - detail::kHeaderBytes) +
                          " does not match dims");
    }
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        values[i] = detail::get_f64(bytes.data() + detail::kHeaderBytes + 8 * i);
    }
    Tensor3 t(d0, d1, d2, std::move(values));
    try {
        if (kind_byte == 0) return ControlFilterMatrix(std::move(t), max_length);
        return PathMatrix(std::move(t));
    } catch (const NumericError& e) {
        throw FormatError(std::string("coefficient file: payload ") + e.what());
    }
}

inline void save_coefficients(const std::filesystem::path& path, CoefficientKind kind,
                              const Tensor3& t) {
    const auto bytes = encode_coefficients(kind, t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline void save_coefficients(const std::filesystem::path& path, const ControlFilterMatrix& w) {
    save_coefficients(path, CoefficientKind::ControlFilter, w.coeffs());
}

inline void save_coefficients(const std::filesystem::path& path, const PathMatrix& p) {
    save_coefficients(path, CoefficientKind::PathMatrix, p.taps());
}

inline CoefficientTensor load_coefficients(const std::filesystem::path& path,
                                           std::size_t max_length = kDefaultMaxLength) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_coefficients(bytes, max_length);
}

inline PathMatrix load_path_matrix(const std::filesystem::path& path) {
    auto t = load_coefficients(path);
    if (auto* p = std::get_if<PathMatrix>(&t)) return std::move(*p);
    throw FormatError("coefficient file " + path.string() + ": kind is not a path matrix");
}

inline ControlFilterMatrix load_control_filter(const std::filesystem::path& path) {
    auto t = load_coefficients(path);
    if (auto* w = std::get_if<ControlFilterMatrix>(&t)) return std::move(*w);
    throw FormatError("coefficient file " + path.string() + ": kind is not a control filter");
}

}  // namespace mcanc
