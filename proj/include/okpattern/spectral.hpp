#pragma once

#include <memory>
#include <optional>

#include "fft.hpp"

namespace okpattern {

// How the discrete Green operator of the torus acts on grid data.
//  trigonometric: v^(xi) = u^(xi) / (4 pi^2 |xi|^2); the field is read as its
//                 trigonometric interpolant.
//  voxel:         the field is read as piecewise constant on cells and v is the
//                 cell average of the exact potential.  Exact for indicator
//                 fields of unions of cells.
//  automatic:     voxel for indicator fields, trigonometric otherwise.
enum class GreenModel { automatic, trigonometric, voxel };

namespace detail {

// sum_m sinc^2(pi (x+m)) exp(-s (x+m)^2) for 0 < |x| <= 1/2.  Direct lattice
// sum for large s, Poisson-summed form for small s.
inline double voxel_axis_factor(double x, double s) {
  const double sx = std::sin(pi * x);
  const double pref = sx * sx / (pi * pi);
  if (s > pi) {
    double acc = 0.0;
    for (int m = -4; m <= 4; ++m) {
      double y = x + m;
      acc += std::exp(-s * y * y) / (y * y);
    }
    return pref * acc;
  }
  const double rs = std::sqrt(s), rpi = std::sqrt(pi);
  double acc = 2.0 * std::sqrt(pi * s);
  for (int k = 1; k <= 4; ++k) {
    double a = pi * k;
    double fk = rpi * (2.0 * rs * std::exp(-a * a / s) - 2.0 * rpi * a * std::erfc(a / rs));
    acc += 2.0 * std::cos(2.0 * pi * k * x) * fk;
  }
  return 1.0 - pref * acc;
}

// Cell-average Green multiplier
//   (1/4pi^2) sum_{m in Z^d} prod_j sinc^2(pi (xi_j + m_j n_j)/n_j) / |xi + m n|^2
// for integer frequency xi != 0.  Everything is evaluated through the
// dimensionless ratios xi_j/n_j and n_j^2/|xi|^2, so the multiplier of k*xi on
// the k-times finer grid is exactly k^-2 times this one.
inline double voxel_multiplier(const std::array<long, 3>& xi, const std::array<std::size_t, 3>& n, int dim) {
  int active = 0, last = -1;
  double xi2 = 0.0;
  for (int a = 0; a < dim; ++a)
    if (xi[a] != 0) {
      ++active;
      last = a;
      xi2 += static_cast<double>(xi[a]) * static_cast<double>(xi[a]);
    }
  if (active == 0) return 0.0;
  if (active == 1) {
    double nn = static_cast<double>(n[last]);
    double s = std::sin(pi * static_cast<double>(xi[last]) / nn);
    return (1.0 / (s * s) - 2.0 / 3.0) / (4.0 * nn * nn);
  }
  // exp-sinh rule on sigma in (0, inf); 145 nodes reach double precision.
  constexpr double h = 1.0 / 16.0;
  constexpr int half = 72;
  double acc = 0.0;
  for (int k = -half; k <= half; ++k) {
    double u = k * h;
    double sigma = std::exp(0.5 * pi * std::sinh(u));
    double wgt = sigma * 0.5 * pi * std::cosh(u);
    double prod = 1.0;
    for (int a = 0; a < dim && prod != 0.0; ++a) {
      if (xi[a] == 0) continue;
      double nn = static_cast<double>(n[a]);
      prod *= voxel_axis_factor(static_cast<double>(xi[a]) / nn, sigma * (nn * nn) / xi2);
    }
    acc += wgt * prod;
  }
  return h * acc / (4.0 * pi * pi * xi2);
}

}  // namespace detail

class SpectralWorkspace {
 public:
  using cplx = std::complex<double>;

  explicit SpectralWorkspace(const GridSpec& g) : fft_(g) {
    const std::size_t nc = fft_.complex_size();
    freq_.resize(nc);
    weight_.resize(nc);
    trig_.resize(nc);
    for (std::size_t i = 0; i < nc; ++i) {
      freq_[i] = fft_.frequency(i);
      weight_[i] = fft_.parseval_weight(i);
      double k2 = 0.0;
      for (int a = 0; a < g.dim; ++a) k2 += static_cast<double>(freq_[i][a] * freq_[i][a]);
      trig_[i] = k2 == 0.0 ? 0.0 : 1.0 / (4.0 * pi * pi * k2);
    }
  }

  const GridSpec& spec() const { return fft_.spec(); }
  RealFft& fft() { return fft_; }
  std::size_t complex_size() const { return freq_.size(); }
  const std::array<long, 3>& frequency(std::size_t i) const { return freq_[i]; }
  double weight(std::size_t i) const { return weight_[i]; }

  const std::vector<double>& multiplier(GreenModel m) {
    if (m == GreenModel::voxel) return voxel();
    return trig_;
  }
  GreenModel resolve(GreenModel m, FieldKind kind) const {
    if (m != GreenModel::automatic) return m;
    return kind == FieldKind::indicator ? GreenModel::voxel : GreenModel::trigonometric;
  }

  // Normalised coefficients c(xi) = (1/N) sum_x u(x) e^{-2 pi i xi . j}.
  std::vector<cplx> transform(const std::vector<double>& u) {
    check_size(u.size());
    fft_.forward(u);
    const double s = 1.0 / static_cast<double>(fft_.real_size());
    std::vector<cplx> c(fft_.coeffs(), fft_.coeffs() + fft_.complex_size());
    for (auto& z : c) z *= s;
    return c;
  }
  // Inverse of transform.
  std::vector<double> inverse(const std::vector<cplx>& c) {
    const double s = static_cast<double>(fft_.real_size());
    cplx* buf = fft_.coeffs();
    for (std::size_t i = 0; i < c.size(); ++i) buf[i] = c[i] * s;
    std::vector<double> out;
    fft_.backward(out);
    return out;
  }

  // -Laplace v = rhs - mean(rhs), mean(v) = 0, trigonometric model.
  ScalarField poisson_zero_mean(const ScalarField& rhs) { return potential(rhs, GreenModel::trigonometric); }

  ScalarField potential(const ScalarField& u, GreenModel model = GreenModel::automatic) {
    check(u);
    const auto& mult = multiplier(resolve(model, u.kind));
    auto c = transform(u.values);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= mult[i];
    return ScalarField(spec(), inverse(c), FieldKind::generic);
  }

  // NL(u) = sum_{xi != 0} |u^(xi)|^2 M(xi).
  double nonlocal_energy(const ScalarField& u, GreenModel model = GreenModel::automatic) {
    check(u);
    return quadratic(transform(u.values), multiplier(resolve(model, u.kind)));
  }
  double nonlocal_energy_coeffs(const std::vector<cplx>& c, GreenModel model) {
    return quadratic(c, multiplier(model));
  }

  double quadratic(const std::vector<cplx>& c, const std::vector<double>& mult) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += weight_[i] * std::norm(c[i]) * mult[i];
    return acc;
  }

  // Spectral derivative along every axis; Nyquist coefficients zeroed.
  std::vector<ScalarField> gradient(const ScalarField& u) {
    auto c = transform(u.values);
    std::vector<ScalarField> out;
    for (int a = 0; a < spec().dim; ++a) {
      std::vector<cplx> d(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        long xi = freq_[i][a];
        d[i] = fft_.is_nyquist(xi, a) ? cplx{} : cplx(0.0, 2.0 * pi * static_cast<double>(xi)) * c[i];
      }
      out.emplace_back(spec(), inverse(d), FieldKind::generic);
    }
    return out;
  }

  // Spectral Laplacian with the full |xi|^2 symbol (inverse of poisson_zero_mean).
  ScalarField laplacian(const ScalarField& u) {
    auto c = transform(u.values);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= trig_[i] == 0.0 ? 0.0 : -1.0 / trig_[i];
    return ScalarField(spec(), inverse(c), FieldKind::generic);
  }

  // int |grad u|^2 with the Nyquist-free derivative used by gradient().
  double dirichlet_energy_coeffs(const std::vector<cplx>& c) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += weight_[i] * std::norm(c[i]) * gradient_symbol(i);
    return acc;
  }
  double gradient_symbol(std::size_t i) const {
    double s = 0.0;
    for (int a = 0; a < spec().dim; ++a) {
      long xi = freq_[i][a];
      if (!fft_.is_nyquist(xi, a)) s += static_cast<double>(xi * xi);
    }
    return 4.0 * pi * pi * s;
  }

  // Trigonometric interpolation of grid data at arbitrary points; Nyquist
  // modes use the symmetric cosine so the interpolant is real.
  std::vector<double> interpolate(const ScalarField& u, const std::vector<std::array<double, 3>>& pts) {
    auto c = transform(u.values);
    return interpolate_coeffs(c, pts);
  }
  std::vector<double> interpolate_coeffs(const std::vector<cplx>& c, const std::vector<std::array<double, 3>>& pts) {
    const GridSpec& g = spec();
    std::vector<double> out(pts.size());
    parallel_for(pts.size(), [&](std::size_t p) {
      std::array<std::vector<cplx>, 3> ph;
      for (int a = 0; a < g.dim; ++a) {
        long n = static_cast<long>(g.n[a]);
        double t = pts[p][a] - 0.5 / static_cast<double>(n);
        ph[a].resize(n);
        for (long i = 0; i < n; ++i) {
          long xi = (a == g.dim - 1) ? i : (i < n / 2 ? i : i - n);
          if (a == g.dim - 1 && i > n / 2) continue;
          double arg = 2.0 * pi * static_cast<double>(xi) * t;
          ph[a][i] = (2 * std::abs(xi) == n) ? cplx(std::cos(arg), 0.0) : cplx(std::cos(arg), std::sin(arg));
        }
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& xi = freq_[i];
        cplx e(1.0, 0.0);
        for (int a = 0; a < g.dim; ++a) {
          long n = static_cast<long>(g.n[a]);
          std::size_t j = static_cast<std::size_t>(a == g.dim - 1 ? xi[a] : (xi[a] + n) % n);
          e *= ph[a][j];
        }
        acc += weight_[i] * (c[i] * e).real();
      }
      out[p] = acc;
    });
    return out;
  }

 private:
  void check_size(std::size_t n) const {
    if (n != fft_.real_size()) throw ConfigError("spectral: field does not match workspace grid");
  }
  void check(const ScalarField& u) const {
    if (!(u.spec == spec())) throw ConfigError("spectral: field does not match workspace grid");
  }

  const std::vector<double>& voxel() {
    if (voxel_) return *voxel_;
    const GridSpec& g = spec();
    // The multiplier depends on |xi_a| only; tabulate on the folded lattice.
    std::array<std::size_t, 3> m{1, 1, 1};
    for (int a = 0; a < g.dim; ++a) m[a] = g.n[a] / 2 + 1;
    std::vector<double> table(m[0] * m[1] * m[2]);
    parallel_for(table.size(), [&](std::size_t t) {
      std::array<long, 3> xi{static_cast<long>(t / (m[1] * m[2])), static_cast<long>((t / m[2]) % m[1]),
                             static_cast<long>(t % m[2])};
      table[t] = detail::voxel_multiplier(xi, g.n, g.dim);
    });
    auto v = std::make_unique<std::vector<double>>(freq_.size());
    for (std::size_t i = 0; i < freq_.size(); ++i) {
      const auto& xi = freq_[i];
      (*v)[i] = table[(std::abs(xi[0]) * m[1] + std::abs(xi[1])) * m[2] + std::abs(xi[2])];
    }
    voxel_ = std::move(v);
    return *voxel_;
  }

  RealFft fft_;
  std::vector<std::array<long, 3>> freq_;
  std::vector<double> weight_, trig_;
  std::unique_ptr<std::vector<double>> voxel_;
};

// Periodic multilinear interpolation weights on the cell-centred grid.  Returns
// up to 2^dim (index, weight) pairs.
struct Stencil {
  std::array<std::size_t, 8> idx{};
  std::array<double, 8> w{};
  int count = 0;
};

inline Stencil multilinear_stencil(const GridSpec& g, const std::array<double, 3>& p) {
  std::array<std::array<std::size_t, 2>, 3> ii{};
  std::array<std::array<double, 2>, 3> ww{};
  for (int a = 0; a < 3; ++a) {
    if (a >= g.dim) {
      ii[a] = {0, 0};
      ww[a] = {1.0, 0.0};
      continue;
    }
    long n = static_cast<long>(g.n[a]);
    double t = p[a] * static_cast<double>(n) - 0.5;
    double fl = std::floor(t);
    double f = t - fl;
    long i0 = ((static_cast<long>(fl) % n) + n) % n;
    ii[a] = {static_cast<std::size_t>(i0), static_cast<std::size_t>((i0 + 1) % n)};
    ww[a] = {1.0 - f, f};
  }
  Stencil s;
  const int c1 = g.dim >= 2 ? 2 : 1, c2 = g.dim >= 3 ? 2 : 1;
  for (int b0 = 0; b0 < 2; ++b0)
    for (int b1 = 0; b1 < c1; ++b1)
      for (int b2 = 0; b2 < c2; ++b2) {
        s.idx[s.count] = g.index(ii[0][b0], ii[1][b1], ii[2][b2]);
        s.w[s.count] = ww[0][b0] * ww[1][b1] * ww[2][b2];
        ++s.count;
      }
  return s;
}

inline double interpolate_linear(const ScalarField& u, const std::array<double, 3>& p) {
  auto s = multilinear_stencil(u.spec, p);
  double acc = 0.0;
  for (int j = 0; j < s.count; ++j) acc += s.w[j] * u[s.idx[j]];
  return acc;
}

// Deposit point masses as a density: the adjoint of interpolate_linear under
// the grid inner product sum_i h^N f_i g_i.
inline ScalarField splat(const GridSpec& g, const std::vector<std::array<double, 3>>& pts,
                         const std::vector<double>& mass) {
  ScalarField out(g);
  const double inv_cell = static_cast<double>(g.size());
  for (std::size_t p = 0; p < pts.size(); ++p) {
    auto s = multilinear_stencil(g, pts[p]);
    for (int j = 0; j < s.count; ++j) out[s.idx[j]] += mass[p] * s.w[j] * inv_cell;
  }
  return out;
}

// Second-order centred difference along one axis.
inline ScalarField central_difference(const ScalarField& u, int axis) {
  const GridSpec& g = u.spec;
  ScalarField out(g);
  const double inv2h = 0.5 * static_cast<double>(g.n[axis]);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto j = g.unravel(i);
    auto jp = j, jm = j;
    jp[axis] = (j[axis] + 1) % g.n[axis];
    jm[axis] = (j[axis] + g.n[axis] - 1) % g.n[axis];
    out[i] = (u[g.index(jp[0], jp[1], jp[2])] - u[g.index(jm[0], jm[1], jm[2])]) * inv2h;
  }
  return out;
}

}  // namespace okpattern
