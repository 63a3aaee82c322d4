#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "torus_field.hpp"

namespace okpattern {

// OKF1 layout: "OKF1", kind byte, dim byte, two zero bytes, dim little-endian
// uint32 sizes, then little-endian binary64 values, last axis fastest.

namespace detail {
template <class T>
void put_le(std::string& buf, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  buf.append(reinterpret_cast<const char*>(b), sizeof(T));
}
template <class T>
T get_le(const unsigned char* p) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}
}  // namespace detail

inline std::string encode_field(const ScalarField& f) {
  std::string buf = "OKF1";
  buf.push_back(static_cast<char>(f.kind));
  buf.push_back(static_cast<char>(f.spec.dim));
  buf.push_back('\0');
  buf.push_back('\0');
  for (int a = 0; a < f.spec.dim; ++a) detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(f.spec.n[a]));
  buf.reserve(buf.size() + 8 * f.size());
  for (double x : f.values) detail::put_le<double>(buf, x);
  return buf;
}

inline ScalarField decode_field(const std::string& buf) {
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (buf.size() < 8 || std::memcmp(p, "OKF1", 4) != 0) throw FormatError("bad magic");
  unsigned kind = p[4], dim = p[5];
  if (kind > 2) throw FormatError("unknown kind byte " + std::to_string(kind));
  if (dim < 1 || dim > 3) throw FormatError("unsupported dim " + std::to_string(dim));
  if (p[6] != 0 || p[7] != 0) throw FormatError("reserved header bytes not zero");
  if (buf.size() < 8 + 4 * dim) throw FormatError("truncated");
  std::vector<std::size_t> sizes(dim);
  unsigned long long total = 1;
  for (unsigned a = 0; a < dim; ++a) {
    sizes[a] = detail::get_le<std::uint32_t>(p + 8 + 4 * a);
    if (sizes[a] == 0) throw FormatError("zero size");
    total *= sizes[a];
    if (total > (1ull << 40)) throw FormatError("size overflow");
  }
  const std::size_t off = 8 + 4 * dim;
  if (buf.size() - off != total * 8) throw FormatError("truncated");
  GridSpec g;
  try {
    g = GridSpec(sizes);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("size overflow or invalid grid: ") + e.what());
  }
  std::vector<double> v(total);
  for (std::size_t i = 0; i < total; ++i) v[i] = detail::get_le<double>(p + off + 8 * i);
  try {
    return ScalarField(g, std::move(v), static_cast<FieldKind>(kind));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("payload violates kind: ") + e.what());
  }
}

inline void write_field(const ScalarField& f, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
  auto buf = encode_field(f);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_field(buf);
}

}  // namespace okpattern
