#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "reid/errors.hpp"

namespace reid::io {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) |
         ((v & 0x00FF0000u) >> 8) | ((v & 0xFF000000u) >> 24);
}

inline std::uint64_t byteswap64(std::uint64_t v) {
  return (static_cast<std::uint64_t>(byteswap32(static_cast<std::uint32_t>(v))) << 32) |
         byteswap32(static_cast<std::uint32_t>(v >> 32));
}

inline void write_u32le(std::ostream& os, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32le(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    throw DataError("truncated file while reading " + what);
  }
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  return v;
}

inline void write_f64le(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
  os.write(reinterpret_cast<const char*>(&v), 8);
}

inline double read_f64le(std::istream& is, const std::string& what) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) {
    throw DataError("truncated file while reading " + what);
  }
  if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

inline void write_f32le(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline float read_f32le(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    throw DataError("truncated file while reading " + what);
  }
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) {
  os.write(magic, 8);
}

inline void expect_magic(std::istream& is, const char (&magic)[9],
                         const std::string& what) {
  char buf[8];
  if (!is.read(buf, 8)) {
    throw DataError("truncated file while reading magic of " + what);
  }
  if (std::memcmp(buf, magic, 8) != 0) {
    throw DataError(what + ": bad magic, expected \"" + std::string(magic, 8) +
                    "\" got \"" + std::string(buf, 8) + "\"");
  }
}

}  // namespace reid::io
