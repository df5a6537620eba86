#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "eegaze/error.hpp"

namespace eegaze {

// Little-endian binary primitives shared by the EEGR dataset and EEGM
// checkpoint formats. Byte order is explicit so files are portable across
// hosts.

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xFF),
        static_cast<unsigned char>((v >> 8) & 0xFF),
        static_cast<unsigned char>((v >> 16) & 0xFF),
        static_cast<unsigned char>((v >> 24) & 0xFF),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
    if (!out) throw Error("binary write failed");
}

inline std::uint32_t read_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw FormatError(FormatError::Kind::truncated, "unexpected end of stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32le(std::ostream& out, float v) {
    write_u32le(out, std::bit_cast<std::uint32_t>(v));
}

inline float read_f32le(std::istream& in) {
    return std::bit_cast<float>(read_u32le(in));
}

inline void write_f32le_array(std::ostream& out, const float* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
        if (!out) throw Error("binary write failed");
    } else {
        for (std::size_t i = 0; i < count; ++i) write_f32le(out, data[i]);
    }
}

inline void read_f32le_array(std::istream& in, float* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
        if (in.gcount() != static_cast<std::streamsize>(count * 4))
            throw FormatError(FormatError::Kind::truncated, "unexpected end of stream");
    } else {
        for (std::size_t i = 0; i < count; ++i) data[i] = read_f32le(in);
    }
}

inline void write_magic(std::ostream& out, const char magic[4]) {
    out.write(magic, 4);
    if (!out) throw Error("binary write failed");
}

inline void expect_magic(std::istream& in, const char magic[4], const char* what) {
    char got[4];
    in.read(got, 4);
    if (in.gcount() != 4)
        throw FormatError(FormatError::Kind::truncated, "unexpected end of stream");
    if (std::memcmp(got, magic, 4) != 0)
        throw FormatError(FormatError::Kind::bad_magic, std::string("bad magic for ") + what);
}

} // namespace eegaze
