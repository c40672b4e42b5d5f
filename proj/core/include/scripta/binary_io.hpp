#pragma once

// Little-endian primitives shared by the feature-store and model file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "scripta/error.hpp"

namespace scripta::binary {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* data, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("truncated file while reading " + what);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  read_bytes(in, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline float read_f32(std::istream& in, const std::string& what) { return std::bit_cast<float>(read_u32(in, what)); }

/// Bulk float array; fast path when the host is little-endian.
inline void write_f32_array(std::ostream& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(out, data, n * sizeof(float));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_f32(out, data[i]);
  }
}

inline void read_f32_array(std::istream& in, float* data, std::size_t n, const std::string& what) {
  if constexpr (std::endian::native == std::endian::little) {
    read_bytes(in, data, n * sizeof(float), what);
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f32(in, what);
  }
}

/// Rejects trailing garbage after the last expected section.
inline void expect_eof(std::istream& in, const std::string& what) {
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("unexpected trailing bytes in " + what);
}

}  // namespace scripta::binary
