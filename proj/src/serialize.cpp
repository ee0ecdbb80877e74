#include "mtc/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "mtc/errors.hpp"

namespace mtc::io {

namespace {

constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kMaxRank = 8;  // sanity bound when reading headers

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError(std::string("truncated stream while reading ") + what);
}

void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

std::uint8_t get_u8(std::istream& is, const char* what) {
    std::uint8_t v;
    get_bytes(is, &v, 1, what);
    return v;
}

void put_u16le(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    put_bytes(os, b, 2);
}

std::uint16_t get_u16le(std::istream& is, const char* what) {
    unsigned char b[2];
    get_bytes(is, b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

std::uint32_t get_u32le(std::istream& is, const char* what) {
    unsigned char b[4];
    get_bytes(is, b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f64le(std::ostream& os, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(src[i]);
        unsigned char b[8];
        for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>(bits >> (8 * j));
        put_bytes(os, b, 8);
    }
}

void get_f64le(std::istream& is, double* dst, std::size_t n, const char* what) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        get_bytes(is, b, 8, what);
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        dst[i] = std::bit_cast<double>(bits);
    }
}

void check_magic(std::istream& is, const char expect[4], const char* what) {
    char m[4];
    get_bytes(is, m, 4, what);
    if (std::memcmp(m, expect, 4) != 0)
        throw FormatError(std::string("bad magic for ") + what + ": expected '" +
                          std::string(expect, 4) + "', got '" + std::string(m, 4) + "'");
}

void check_version(std::istream& is, const char* what) {
    const std::uint8_t v = get_u8(is, what);
    if (v != kVersion)
        throw FormatError(std::string("unsupported ") + what + " version " +
                          std::to_string(v));
}

template <typename Fn>
void save_file(const std::string& path, Fn&& write) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write(os);
    os.flush();
    if (!os) throw IoError("failed writing '" + path + "'");
}

template <typename Fn>
auto load_file(const std::string& path, Fn&& read) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return read(is);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    const auto& shape = t.shape();
    if (shape.size() > kMaxRank)
        throw ValueError("tensor rank " + std::to_string(shape.size()) +
                         " exceeds serializable maximum " + std::to_string(kMaxRank));
    for (std::size_t e : shape)
        if (e > std::numeric_limits<std::uint32_t>::max())
            throw ValueError("tensor extent too large for 32-bit header");
    put_bytes(os, "TNSR", 4);
    put_u8(os, kVersion);
    put_u8(os, static_cast<std::uint8_t>(shape.size()));
    for (std::size_t e : shape) put_u32le(os, static_cast<std::uint32_t>(e));
    put_f64le(os, t.data(), t.numel());
}

Tensor read_tensor(std::istream& is) {
    check_magic(is, "TNSR", "tensor");
    check_version(is, "tensor");
    const std::uint8_t rank = get_u8(is, "tensor rank");
    if (rank > kMaxRank)
        throw FormatError("tensor rank " + std::to_string(rank) + " exceeds maximum " +
                          std::to_string(kMaxRank));
    Shape shape(rank);
    for (auto& e : shape) {
        e = get_u32le(is, "tensor extent");
        if (e == 0) throw FormatError("tensor extent is zero");
    }
    std::vector<double> data(shape_numel(shape));
    get_f64le(is, data.data(), data.size(), "tensor data");
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    save_file(path, [&](std::ostream& os) { write_tensor(os, t); });
}

Tensor load_tensor(const std::string& path) {
    return load_file(path, [](std::istream& is) { return read_tensor(is); });
}

void write_density_map(std::ostream& os, const Tensor& t) {
    if (t.rank() != 2)
        throw ShapeError("density map must be rank 2, got " + shape_str(t.shape()));
    put_bytes(os, "DMAP", 4);
    put_u8(os, kVersion);
    put_u32le(os, static_cast<std::uint32_t>(t.extent(0)));
    put_u32le(os, static_cast<std::uint32_t>(t.extent(1)));
    put_f64le(os, t.data(), t.numel());
}

Tensor read_density_map(std::istream& is) {
    check_magic(is, "DMAP", "density map");
    check_version(is, "density map");
    const std::size_t h = get_u32le(is, "density map height");
    const std::size_t w = get_u32le(is, "density map width");
    if (h == 0 || w == 0) throw FormatError("density map has a zero dimension");
    std::vector<double> data(h * w);
    get_f64le(is, data.data(), data.size(), "density map data");
    return Tensor::from_data({h, w}, std::move(data));
}

void save_density_map(const std::string& path, const Tensor& t) {
    save_file(path, [&](std::ostream& os) { write_density_map(os, t); });
}

Tensor load_density_map(const std::string& path) {
    return load_file(path, [](std::istream& is) { return read_density_map(is); });
}

void write_weights(std::ostream& os, const NamedTensors& entries) {
    if (entries.size() > std::numeric_limits<std::uint32_t>::max())
        throw ValueError("too many weight entries");
    put_bytes(os, "MTCW", 4);
    put_u8(os, kVersion);
    put_u32le(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
            throw ValueError("weight name too long: " + name.substr(0, 32) + "...");
        put_u16le(os, static_cast<std::uint16_t>(name.size()));
        put_bytes(os, name.data(), name.size());
        write_tensor(os, tensor);
    }
}

NamedTensors read_weights(std::istream& is) {
    check_magic(is, "MTCW", "weight bundle");
    check_version(is, "weight bundle");
    const std::uint32_t count = get_u32le(is, "weight entry count");
    NamedTensors entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = get_u16le(is, "weight name length");
        std::string name(len, '\0');
        if (len) get_bytes(is, name.data(), len, "weight name");
        entries.emplace_back(std::move(name), read_tensor(is));
    }
    return entries;
}

void save_weights(const std::string& path, const NamedTensors& entries) {
    save_file(path, [&](std::ostream& os) { write_weights(os, entries); });
}

NamedTensors load_weights(const std::string& path) {
    return load_file(path, [](std::istream& is) { return read_weights(is); });
}

}  // namespace mtc::io
