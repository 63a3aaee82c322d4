#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"

namespace okpattern {

enum class FieldKind : std::uint8_t { generic = 0, indicator = 1, phase = 2 };

inline const char* kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::generic: return "generic";
    case FieldKind::indicator: return "indicator";
    case FieldKind::phase: return "phase";
  }
  return "?";
}

// Uniform cell-centred sampling of [0,1)^dim; unused trailing axes have size 1.
struct GridSpec {
  int dim = 2;
  std::array<std::size_t, 3> n{1, 1, 1};

  static constexpr std::size_t default_max_samples = std::size_t{1} << 27;

  GridSpec() = default;
  explicit GridSpec(std::vector<std::size_t> sizes, std::size_t max_samples = default_max_samples) {
    if (sizes.empty() || sizes.size() > 3) throw ConfigError("grid: dim must be 1, 2 or 3");
    dim = static_cast<int>(sizes.size());
    for (int a = 0; a < dim; ++a) n[a] = sizes[a];
    validate(max_samples);
  }

  void validate(std::size_t max_samples = default_max_samples) const {
    if (dim < 1 || dim > 3) throw ConfigError("grid: dim must be 1, 2 or 3");
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) {
      if (n[a] < 4 || n[a] % 2 != 0)
        throw ConfigError("grid: size along axis " + std::to_string(a) + " must be even and >= 4");
      if (total > max_samples / n[a]) throw ConfigError("grid: sample count exceeds budget");
      total *= n[a];
    }
    for (int a = dim; a < 3; ++a)
      if (n[a] != 1) throw ConfigError("grid: unused axes must have size 1");
  }

  std::size_t size() const { return n[0] * n[1] * n[2]; }
  double h(int a) const { return 1.0 / static_cast<double>(n[a]); }
  double cell_volume() const { return 1.0 / static_cast<double>(size()); }
  std::size_t min_n() const {
    std::size_t m = n[0];
    for (int a = 1; a < dim; ++a) m = std::min(m, n[a]);
    return m;
  }
  double max_h() const { return 1.0 / static_cast<double>(min_n()); }

  std::size_t index(std::size_t i0, std::size_t i1 = 0, std::size_t i2 = 0) const {
    return (i0 * n[1] + i1) * n[2] + i2;
  }
  std::array<std::size_t, 3> unravel(std::size_t idx) const {
    return {idx / (n[1] * n[2]), (idx / n[2]) % n[1], idx % n[2]};
  }
  std::array<double, 3> center(std::size_t idx) const {
    auto i = unravel(idx);
    std::array<double, 3> x{0, 0, 0};
    for (int a = 0; a < dim; ++a) x[a] = (static_cast<double>(i[a]) + 0.5) / static_cast<double>(n[a]);
    return x;
  }

  GridSpec scaled(std::size_t k) const {
    GridSpec g = *this;
    for (int a = 0; a < dim; ++a) g.n[a] *= k;
    return g;
  }
  bool divisible_by(std::size_t k) const {
    for (int a = 0; a < dim; ++a)
      if (n[a] % k != 0) return false;
    return true;
  }
  GridSpec divided(std::size_t k) const {
    if (!divisible_by(k)) throw ConfigError("grid: k=" + std::to_string(k) + " does not divide every size");
    GridSpec g = *this;
    for (int a = 0; a < dim; ++a) g.n[a] /= k;
    g.validate();
    return g;
  }

  bool operator==(const GridSpec&) const = default;
};

struct ScalarField {
  GridSpec spec;
  std::vector<double> values;
  FieldKind kind = FieldKind::generic;

  static constexpr double phase_overshoot = 0.1;

  ScalarField() = default;
  ScalarField(const GridSpec& g, FieldKind k = FieldKind::generic, double fill = 0.0)
      : spec(g), values(g.size(), fill), kind(k) {}
  ScalarField(const GridSpec& g, std::vector<double> v, FieldKind k) : spec(g), values(std::move(v)), kind(k) {
    validate();
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  void validate() const {
    if (values.size() != spec.size()) throw ConfigError("field: value count does not match grid");
    if (kind == FieldKind::indicator) {
      for (double x : values)
        if (x != 1.0 && x != -1.0) throw ConfigError("field: indicator values must be +1 or -1");
    } else if (kind == FieldKind::phase) {
      for (double x : values)
        if (!(std::abs(x) <= 1.0 + phase_overshoot))
          throw ConfigError("field: phase values outside [-1-kappa, 1+kappa]");
    }
  }

  double mean() const {
    double s = 0.0;
    for (double x : values) s += x;
    return s / static_cast<double>(values.size());
  }
  double integral() const { return mean(); }
};

// ---------------------------------------------------------------------------
// candidate shapes

struct Lamella {
  int axis = 0;
  double c = 0.5;
  double w = 0.25;
};
struct Ball {
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double r = 0.25;
};
// Axis of the cylinder; center holds the cross-section coordinates in the two
// remaining axes taken in increasing order.
struct Cylinder {
  int axis = 2;
  std::array<double, 2> center{0.5, 0.5};
  double r = 0.25;
};

using ShapeCandidate = std::variant<Lamella, Ball, Cylinder>;

inline std::array<int, 2> cross_axes(int axis) {
  std::array<int, 2> out{};
  int j = 0;
  for (int a = 0; a < 3; ++a)
    if (a != axis) out[j++] = a;
  return out;
}

inline void validate_shape(const ShapeCandidate& s, int dim) {
  std::visit(
      [dim](const auto& sh) {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Lamella>) {
          if (sh.axis < 0 || sh.axis >= dim) throw ConfigError("shape: lamella axis outside grid dimension");
          if (!(sh.w > 0.0 && sh.w < 0.5)) throw ConfigError("shape: lamella halfwidth must lie in (0, 1/2)");
          if (!(sh.c >= 0.0 && sh.c < 1.0)) throw ConfigError("shape: lamella center must lie in [0, 1)");
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (!(sh.r > 0.0 && sh.r < 0.5)) throw ConfigError("shape: ball radius must lie in (0, 1/2)");
          for (int a = 0; a < dim; ++a)
            if (!(sh.center[a] >= 0.0 && sh.center[a] < 1.0)) throw ConfigError("shape: ball center outside [0,1)");
        } else {
          if (dim != 3) throw ConfigError("shape: cylinder requires dim 3");
          if (sh.axis < 0 || sh.axis > 2) throw ConfigError("shape: cylinder axis outside grid dimension");
          if (!(sh.r > 0.0 && sh.r < 0.5)) throw ConfigError("shape: cylinder radius must lie in (0, 1/2)");
        }
      },
      s);
}

// Periodic signed distance to the boundary, positive inside.
inline double signed_distance(const ShapeCandidate& s, int dim, const std::array<double, 3>& x) {
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Lamella>) {
          return sh.w - std::abs(periodic_offset(x[sh.axis] - sh.c));
        } else if constexpr (std::is_same_v<T, Ball>) {
          double r2 = 0.0;
          for (int a = 0; a < dim; ++a) {
            double d = periodic_offset(x[a] - sh.center[a]);
            r2 += d * d;
          }
          return sh.r - std::sqrt(r2);
        } else {
          auto ax = cross_axes(sh.axis);
          double d0 = periodic_offset(x[ax[0]] - sh.center[0]);
          double d1 = periodic_offset(x[ax[1]] - sh.center[1]);
          return sh.r - std::hypot(d0, d1);
        }
      },
      s);
}

// Signed distance of E^k = {x : kx in E}: the rescaled, 1/k-periodic copy.
inline double signed_distance(const ShapeCandidate& s, int dim, const std::array<double, 3>& x, int k) {
  if (k == 1) return signed_distance(s, dim, x);
  std::array<double, 3> y{};
  for (int a = 0; a < 3; ++a) y[a] = frac(k * x[a]);
  return signed_distance(s, dim, y) / k;
}

inline double shape_volume(const ShapeCandidate& s, int dim) {
  return std::visit(
      [dim](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Lamella>) {
          return 2.0 * sh.w;
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (dim == 1) return 2.0 * sh.r;
          if (dim == 2) return pi * sh.r * sh.r;
          return 4.0 / 3.0 * pi * sh.r * sh.r * sh.r;
        } else {
          return pi * sh.r * sh.r;
        }
      },
      s);
}

// Exact perimeter of the candidate in the unit torus.
inline double shape_perimeter(const ShapeCandidate& s, int dim) {
  return std::visit(
      [dim](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Lamella>) {
          return 2.0;
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (dim == 1) return 2.0;
          if (dim == 2) return 2.0 * pi * sh.r;
          return 4.0 * pi * sh.r * sh.r;
        } else {
          return 2.0 * pi * sh.r;
        }
      },
      s);
}

inline ScalarField rasterize(const ShapeCandidate& s, const GridSpec& g, int k = 1) {
  validate_shape(s, g.dim);
  ScalarField u(g, FieldKind::indicator, -1.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (signed_distance(s, g.dim, g.center(i), k) >= 0.0) u[i] = 1.0;
  return u;
}

inline ScalarField tanh_profile(const ShapeCandidate& s, const GridSpec& g, double eps, int k = 1) {
  validate_shape(s, g.dim);
  if (!(eps >= 2.0 * g.max_h()))
    throw ConfigError("tanh_profile: eps below the resolvability bound 2h");
  ScalarField u(g, FieldKind::phase);
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = std::tanh(signed_distance(s, g.dim, g.center(i), k) / eps);
  return u;
}

// Periodic repetition onto the k-times finer grid: the samples of E^k when u
// samples E.  out[i] = u[i mod n] per axis.
inline ScalarField tile(const ScalarField& u, std::size_t k) {
  if (k < 1) throw ConfigError("tile: k must be >= 1");
  if (k == 1) return u;
  const GridSpec& g = u.spec;
  GridSpec out_spec = g.scaled(k);
  out_spec.validate();
  ScalarField out(out_spec, u.kind);
  for (std::size_t i = 0; i < out_spec.size(); ++i) {
    auto j = out_spec.unravel(i);
    out[i] = u[g.index(j[0] % g.n[0], j[1] % g.n[1], j[2] % g.n[2])];
  }
  return out;
}

// Integer grid shift (periodic): out(x) = u(x - t).
inline ScalarField shift(const ScalarField& u, const std::array<long, 3>& t) {
  const GridSpec& g = u.spec;
  ScalarField out(g, u.kind);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto j = g.unravel(i);
    std::array<std::size_t, 3> s{};
    for (int a = 0; a < 3; ++a) {
      long n = static_cast<long>(g.n[a]);
      s[a] = static_cast<std::size_t>(((static_cast<long>(j[a]) - t[a]) % n + n) % n);
    }
    out[i] = u[g.index(s[0], s[1], s[2])];
  }
  return out;
}

// Sharpen a phase field into an indicator by thresholding at a level chosen by
// bisection so the number of +1 cells matches target_volume to one cell.
inline ScalarField sharpen(const ScalarField& u, double target_volume) {
  const auto& v = u.values;
  const std::size_t n = v.size();
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end());
  auto count_above = [&](double level) {
    return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), level));
  };
  const double target_cells = target_volume * static_cast<double>(n);
  auto miss = [&](double l) { return static_cast<double>(count_above(l)) - target_cells; };
  // Ties in the field (symmetric sets) can make one-cell accuracy unreachable;
  // keep the best level seen.
  double level = 0.0, best = std::abs(miss(0.0));
  double lo = sorted.front() - 1.0, hi = sorted.back() + 1.0;
  for (int it = 0; it < 200 && best > 1.0; ++it) {
    double mid = 0.5 * (lo + hi);
    double m = miss(mid);
    if (std::abs(m) < best) best = std::abs(m), level = mid;
    if (m > 0) lo = mid;
    else hi = mid;
  }
  ScalarField out(u.spec, FieldKind::indicator, -1.0);
  for (std::size_t i = 0; i < n; ++i)
    if (v[i] >= level) out[i] = 1.0;
  return out;
}

inline double volume_of(const ScalarField& indicator) { return 0.5 * (1.0 + indicator.mean()); }

}  // namespace okpattern
