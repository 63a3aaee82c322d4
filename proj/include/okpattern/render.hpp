#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "torus_field.hpp"

namespace okpattern {

// Grayscale P6 heatmap.  Columns run along the first displayed axis, rows
// along the second, and row 0 is the y = 0 edge.  min maps to 0, max to 255;
// a constant field is mid-gray (128).  For 3D fields `axis` and `index` pick
// the slice; 2D fields ignore them.
inline std::string encode_heatmap(const ScalarField& f, int axis = 2, std::size_t index = 0) {
  const GridSpec& g = f.spec;
  if (g.dim < 2) throw ConfigError("render: field must be 2D or 3D");
  int ax = 0, ay = 1;
  std::array<std::size_t, 3> base{0, 0, 0};
  if (g.dim == 3) {
    if (axis < 0 || axis > 2) throw ConfigError("render: slice axis must be 0, 1 or 2");
    if (index >= g.n[axis]) throw ConfigError("render: slice index out of range");
    auto c = cross_axes(axis);
    ax = c[0];
    ay = c[1];
    base[axis] = index;
  }
  const std::size_t W = g.n[ax], H = g.n[ay];
  auto at = [&](std::size_t i, std::size_t j) {
    auto p = base;
    p[ax] = i;
    p[ay] = j;
    return f[g.index(p[0], p[1], p[2])];
  };
  double lo = at(0, 0), hi = lo;
  for (std::size_t j = 0; j < H; ++j)
    for (std::size_t i = 0; i < W; ++i) {
      lo = std::min(lo, at(i, j));
      hi = std::max(hi, at(i, j));
    }
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  out.reserve(out.size() + 3 * W * H);
  for (std::size_t j = 0; j < H; ++j)
    for (std::size_t i = 0; i < W; ++i) {
      unsigned char v = 128;
      if (hi > lo) v = static_cast<unsigned char>(std::lround(255.0 * (at(i, j) - lo) / (hi - lo)));
      out.append(3, static_cast<char>(v));
    }
  return out;
}

inline void render_heatmap(const ScalarField& f, const std::filesystem::path& path, int axis = 2,
                           std::size_t index = 0) {
  auto bytes = encode_heatmap(f, axis, index);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("render: cannot open " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ConfigError("render: write failed for " + path.string());
}

}  // namespace okpattern
