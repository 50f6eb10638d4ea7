#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "seqrec/error.hpp"

// Little-endian binary primitives shared by the embedding, checkpoint and
// index file formats. Values are assembled byte-by-byte so the files are
// identical regardless of host endianness.

namespace seqrec::bin {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) fail(ErrorCode::Io, "unexpected end of binary stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) fail(ErrorCode::Io, "unexpected end of binary stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline float read_f32(std::istream& is) {
    const std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline std::string read_string(std::istream& is, std::uint32_t max_len = 1u << 20) {
    const std::uint32_t n = read_u32(is);
    if (n > max_len) fail(ErrorCode::Parse, "string length field out of range");
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), n)) fail(ErrorCode::Io, "unexpected end of binary stream");
    return s;
}

inline void write_magic(std::ostream& os, const char magic[8]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char magic[8], const char* what) {
    char buf[8];
    if (!is.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
        fail(ErrorCode::Parse, std::string("not a ") + what + " file (bad magic)");
    }
}

}  // namespace seqrec::bin
