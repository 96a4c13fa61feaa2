#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "timbre/errors.hpp"

namespace timbre {

// Little-endian scalar I/O. The in-memory representation on every platform
// this builds for is already little-endian; memcpy keeps it alias-safe.

template <class T>
void write_le(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw FormatError("unexpected end of file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void write_magic(std::ostream& os, const std::string& magic) {
  os.write(magic.data(), std::streamsize(magic.size()));
}

inline void expect_magic(std::istream& is, const std::string& magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), std::streamsize(magic.size()));
  if (!is || got != magic)
    throw FormatError("bad magic, expected '" + magic + "'");
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
  auto n = read_le<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw FormatError("unexpected end of file in string");
  return s;
}

}  // namespace timbre
