#pragma once

#include <Eigen/Sparse>
#include <ostream>

#include "spectral.hpp"

namespace okpattern {

// One tangential coordinate direction on one chart.  D maps chart-local values
// to their derivative along the coordinate; ginv is the inverse metric entry
// g^{aa} at each chart point (coordinates are orthogonal on every chart).
//
// A nodal spectral derivative annihilates the alternating (Nyquist) pattern,
// which would leave a spurious zero-energy mode in the quadratic forms.  Along
// periodic coordinate lines that mode is restored with its true symbol
// (pi m / period)^2: `lines` lists chart-local node sequences along the
// coordinate and `nyquist` that symbol (0 when not applicable).
struct TangentOp {
  std::vector<std::size_t> idx;
  Eigen::SparseMatrix<double, Eigen::RowMajor> D;
  std::vector<double> ginv;
  std::vector<std::vector<std::size_t>> lines;
  double nyquist = 0.0;
};

struct InterfaceMesh {
  int dim = 2;
  std::vector<std::array<double, 3>> points;
  std::vector<std::array<double, 3>> normals;
  std::vector<double> weights;
  std::vector<double> curvature;  // mean curvature H, positive for convex E
  std::vector<double> b2;         // |B|^2
  std::vector<TangentOp> ops;
  int k = 1;  // tiling factor already applied

  std::size_t size() const { return points.size(); }
  double area() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  // Per-point |grad_tau f|^2.
  std::vector<double> tangential_grad2(const std::vector<double>& f) const {
    std::vector<double> out(size(), 0.0);
    for (const auto& op : ops) {
      Eigen::VectorXd loc(op.idx.size());
      for (std::size_t j = 0; j < op.idx.size(); ++j) loc[j] = f[op.idx[j]];
      Eigen::VectorXd d = op.D * loc;
      for (std::size_t j = 0; j < op.idx.size(); ++j) out[op.idx[j]] += op.ginv[j] * d[j] * d[j];
    }
    return out;
  }

  // int |D_tau f|^2 over the interface, Nyquist content included.
  double dirichlet(const std::vector<double>& f) const {
    auto g2 = tangential_grad2(f);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights[i] * g2[i];
    for (const auto& op : ops)
      for (const auto& line : op.lines) {
        double a = 0.0, sg = 1.0;
        for (std::size_t j : line) {
          a += sg * f[op.idx[j]];
          sg = -sg;
        }
        a /= static_cast<double>(line.size());
        for (std::size_t j : line) s += weights[op.idx[j]] * op.ginv[j] * op.nyquist * a * a;
      }
    return s;
  }

  double integrate(const std::vector<double>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights[i] * f[i];
    return s;
  }
};

namespace detail {

// Periodic spectral differentiation on m equispaced nodes of period P (Nyquist
// derivative dropped).
inline Eigen::MatrixXd periodic_diff(int m, double period) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, m);
  const double h = 2 * pi / m, s = 2 * pi / period;
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l)
      if (j != l) D(j, l) = s * 0.5 * (((j - l) % 2 == 0) ? 1.0 : -1.0) / std::tan(0.5 * (j - l) * h);
  return D;
}

using Trip = Eigen::Triplet<double>;

inline Eigen::SparseMatrix<double, Eigen::RowMajor> sparse(int n, const std::vector<Trip>& t) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> S(n, n);
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

// Derivative along axis `a` of a periodic tensor grid with extents ext (row
// major, last fastest), on chart nodes base, base+1, ...
inline TangentOp tensor_op(const std::vector<int>& ext, int a, double period, std::size_t base, double ginv) {
  int n = 1;
  for (int e : ext) n *= e;
  auto D1 = periodic_diff(ext[a], period);
  int stride = 1;
  for (std::size_t b = a + 1; b < ext.size(); ++b) stride *= ext[b];
  std::vector<Trip> t;
  TangentOp op;
  for (int i = 0; i < n; ++i) {
    int ia = (i / stride) % ext[a];
    int start = i - ia * stride;
    for (int l = 0; l < ext[a]; ++l)
      if (D1(ia, l) != 0.0) t.emplace_back(i, start + l * stride, D1(ia, l));
    if (ia == 0) {
      std::vector<std::size_t> line;
      for (int l = 0; l < ext[a]; ++l) line.push_back(static_cast<std::size_t>(start + l * stride));
      op.lines.push_back(std::move(line));
    }
    op.idx.push_back(base + static_cast<std::size_t>(i));
  }
  op.D = sparse(n, t);
  op.ginv.assign(n, ginv);
  op.nyquist = std::pow(pi * ext[a] / period, 2);
  return op;
}

// Fejer's first rule on the Chebyshev midpoints theta_j = (j+1/2) pi / n for
// int_0^pi f(theta) sin(theta) dtheta.
inline std::vector<double> fejer_weights(int n) {
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) {
    double th = (j + 0.5) * pi / n, s = 0.0;
    for (int l = 1; l <= n / 2; ++l) s += std::cos(2 * l * th) / (4.0 * l * l - 1.0);
    w[j] = 2.0 / n * (1.0 - 2.0 * s);
  }
  return w;
}

inline std::array<double, 3> wrap(std::array<double, 3> p, int dim) {
  for (int a = 0; a < dim; ++a) p[a] = frac(p[a]);
  return p;
}

}  // namespace detail

// Resolution m is the node count per chart axis; the sphere uses m latitude
// and 2m longitude nodes.
inline InterfaceMesh interface_mesh(const ShapeCandidate& s, int dim, int m) {
  validate_shape(s, dim);
  if (m < 8) throw ConfigError("interface_mesh: resolution must be >= 8");
  if (m % 2) throw ConfigError("interface_mesh: resolution must be even");
  InterfaceMesh M;
  M.dim = dim;
  auto push = [&](std::array<double, 3> p, std::array<double, 3> nu, double w, double H, double B2) {
    M.points.push_back(detail::wrap(p, dim));
    M.normals.push_back(nu);
    M.weights.push_back(w);
    M.curvature.push_back(H);
    M.b2.push_back(B2);
  };
  if (const auto* l = std::get_if<Lamella>(&s)) {
    std::vector<int> tang;
    for (int a = 0; a < dim; ++a)
      if (a != l->axis) tang.push_back(a);
    std::vector<int> ext(tang.size(), m);
    int per = 1;
    for (std::size_t t = 0; t < tang.size(); ++t) per *= m;
    const double w = 1.0 / per;
    for (int side = 0; side < 2; ++side) {
      const std::size_t base = M.size();
      const double sign = side == 0 ? -1.0 : 1.0;
      for (int i = 0; i < per; ++i) {
        std::array<double, 3> p{}, nu{};
        p[l->axis] = l->c + sign * l->w;
        nu[l->axis] = sign;
        int r = i;
        for (int t = static_cast<int>(tang.size()) - 1; t >= 0; --t) {
          p[tang[t]] = (r % m + 0.5) / m;
          r /= m;
        }
        push(p, nu, w, 0.0, 0.0);
      }
      for (std::size_t t = 0; t < tang.size(); ++t) M.ops.push_back(detail::tensor_op(ext, static_cast<int>(t), 1.0, base, 1.0));
    }
    return M;
  }
  if (const auto* b = std::get_if<Ball>(&s)) {
    const double r = b->r;
    if (dim == 1) {
      push({b->center[0] - r, 0, 0}, {-1, 0, 0}, 1.0, 0.0, 0.0);
      push({b->center[0] + r, 0, 0}, {1, 0, 0}, 1.0, 0.0, 0.0);
      return M;
    }
    if (dim == 2) {
      for (int j = 0; j < m; ++j) {
        double th = 2 * pi * j / m;
        std::array<double, 3> nu{std::cos(th), std::sin(th), 0.0};
        push({b->center[0] + r * nu[0], b->center[1] + r * nu[1], 0.0}, nu, r * 2 * pi / m, 1.0 / r, 1.0 / (r * r));
      }
      M.ops.push_back(detail::tensor_op({m}, 0, 2 * pi, 0, 1.0 / (r * r)));
      return M;
    }
    // Double Fourier sphere: theta on midpoints, phi on 2m equispaced nodes.
    const int nt = m, np = 2 * m;
    auto fw = detail::fejer_weights(nt);
    for (int j = 0; j < nt; ++j) {
      double th = (j + 0.5) * pi / nt;
      for (int q = 0; q < np; ++q) {
        double ph = 2 * pi * q / np;
        std::array<double, 3> nu{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
        std::array<double, 3> p{};
        for (int a = 0; a < 3; ++a) p[a] = b->center[a] + r * nu[a];
        push(p, nu, r * r * fw[j] * 2 * pi / np, 2.0 / r, 2.0 / (r * r));
      }
    }
    const int n = nt * np;
    // theta derivative through the even extension f(2 pi - theta, phi + pi).
    auto D2 = detail::periodic_diff(2 * nt, 2 * pi);
    std::vector<detail::Trip> tt;
    for (int j = 0; j < nt; ++j)
      for (int q = 0; q < np; ++q)
        for (int l = 0; l < 2 * nt; ++l) {
          double c = D2(j, l);
          if (c == 0.0) continue;
          int col = l < nt ? l * np + q : (2 * nt - 1 - l) * np + (q + np / 2) % np;
          tt.emplace_back(j * np + q, col, c);
        }
    // The theta extension has no isolated alternating mode on the physical
    // nodes, so only the phi lines carry the Nyquist term.
    TangentOp opt;
    for (int i = 0; i < n; ++i) opt.idx.push_back(i);
    opt.D = detail::sparse(n, tt);
    opt.ginv.assign(n, 1.0 / (r * r));
    TangentOp opp = detail::tensor_op({nt, np}, 1, 2 * pi, 0, 0.0);
    for (int j = 0; j < nt; ++j) {
      double st = std::sin((j + 0.5) * pi / nt);
      for (int q = 0; q < np; ++q) opp.ginv[j * np + q] = 1.0 / (r * r * st * st);
    }
    M.ops.push_back(std::move(opt));
    M.ops.push_back(std::move(opp));
    return M;
  }
  const auto& c = std::get<Cylinder>(s);
  auto ax = cross_axes(c.axis);
  const double r = c.r;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double th = 2 * pi * j / m;
      std::array<double, 3> p{}, nu{};
      p[c.axis] = (i + 0.5) / m;
      nu[ax[0]] = std::cos(th);
      nu[ax[1]] = std::sin(th);
      p[ax[0]] = c.center[0] + r * nu[ax[0]];
      p[ax[1]] = c.center[1] + r * nu[ax[1]];
      push(p, nu, r * 2 * pi / (m * m), 1.0 / r, 1.0 / (r * r));
    }
  M.ops.push_back(detail::tensor_op({m, m}, 0, 1.0, 0, 1.0));
  M.ops.push_back(detail::tensor_op({m, m}, 1, 2 * pi, 0, 1.0 / (r * r)));
  return M;
}

// Mesh of E^k: k^dim shrunken copies.  Lengths scale by 1/k, so weights pick
// up k^(1-dim), curvature k, |B|^2 k^2 and the inverse metric k^2.
inline InterfaceMesh tile_mesh(const InterfaceMesh& in, int k) {
  if (k < 1) throw ConfigError("tile_mesh: k must be >= 1");
  if (k == 1) return in;
  InterfaceMesh out;
  out.dim = in.dim;
  out.k = in.k * k;
  const double ws = std::pow(static_cast<double>(k), 1 - in.dim);
  int copies = 1;
  for (int a = 0; a < in.dim; ++a) copies *= k;
  for (int c = 0; c < copies; ++c) {
    std::array<int, 3> off{};
    int r = c;
    for (int a = in.dim - 1; a >= 0; --a) {
      off[a] = r % k;
      r /= k;
    }
    const std::size_t base = out.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
      std::array<double, 3> p{};
      for (int a = 0; a < in.dim; ++a) p[a] = (in.points[i][a] + off[a]) / k;
      out.points.push_back(p);
      out.normals.push_back(in.normals[i]);
      out.weights.push_back(in.weights[i] * ws);
      out.curvature.push_back(in.curvature[i] * k);
      out.b2.push_back(in.b2[i] * k * k);
    }
    for (const auto& op : in.ops) {
      TangentOp o = op;
      for (auto& j : o.idx) j += base;
      for (auto& g : o.ginv) g *= static_cast<double>(k) * k;
      out.ops.push_back(std::move(o));
    }
  }
  return out;
}

// Mean curvature of a candidate at a boundary point (sum of principal
// curvatures, positive for convex sets).
inline double mean_curvature(const ShapeCandidate& s, int dim, const std::array<double, 3>& p) {
  validate_shape(s, dim);
  if (std::abs(signed_distance(s, dim, p)) > 1e-9) throw ConfigError("mean_curvature: point is not on the boundary");
  return std::visit(
      [dim](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, Lamella>) return 0.0;
        else if constexpr (std::is_same_v<T, Ball>) return dim == 1 ? 0.0 : (dim - 1) / sh.r;
        else return 1.0 / sh.r;
      },
      s);
}

struct CriticalityReport {
  double gamma = 0.0;
  int k = 1;
  double lambda = 0.0;
  double residual_sup = 0.0;
  double grad_H_sup = 0.0;

  static const char* csv_header() { return "gamma,k,lambda,residual_sup,grad_H_sup"; }
  void write_csv_row(std::ostream& os) const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g\n", gamma, k, lambda, residual_sup, grad_H_sup);
    os << buf;
  }
};

// How grad_H_sup is measured.  `curvature` differentiates the sampled H (exact
// for candidates, where it is constant); `euler_lagrange` uses
// grad_tau H = -4 gamma grad_tau v, which holds on critical sets whose curvature
// is not sampled (flow and construction outputs).
enum class CurvatureGradient { curvature, euler_lagrange };

// u is the indicator of the set carried by the mesh (grid of ws).
inline CriticalityReport el_residual(const InterfaceMesh& mesh, const ScalarField& u, double gamma,
                                     SpectralWorkspace& ws,
                                     CurvatureGradient cg = CurvatureGradient::curvature) {
  if (!(gamma >= 0)) throw ConfigError("el_residual: gamma must be >= 0");
  if (mesh.dim != u.spec.dim) throw ConfigError("el_residual: mesh and grid dimensions differ");
  CriticalityReport r;
  r.gamma = gamma;
  r.k = mesh.k;
  std::vector<double> v(mesh.size(), 0.0);
  if (gamma != 0.0) v = ws.interpolate(ws.potential(u), mesh.points);
  std::vector<double> f(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) f[i] = mesh.curvature[i] + 4 * gamma * v[i];
  r.lambda = mesh.integrate(f) / mesh.area();
  for (double x : f) r.residual_sup = std::max(r.residual_sup, std::abs(x - r.lambda));
  std::vector<double> g2;
  if (cg == CurvatureGradient::curvature) {
    g2 = mesh.tangential_grad2(mesh.curvature);
  } else {
    std::vector<double> s(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) s[i] = -4 * gamma * v[i];
    g2 = mesh.tangential_grad2(s);
  }
  for (double x : g2) r.grad_H_sup = std::max(r.grad_H_sup, std::sqrt(x));
  return r;
}

inline CriticalityReport el_residual(const ShapeCandidate& s, double gamma, SpectralWorkspace& ws, int m = 32) {
  const GridSpec& g = ws.spec();
  return el_residual(interface_mesh(s, g.dim, m), rasterize(s, g), gamma, ws);
}

// Signed displacement, along each mesh normal, of the zero level of a phase
// (or indicator) field: the root of the trigonometric interpolant of u on
// p + t nu closest to t = 0 within |t| <= radius.  Returns NaN where no sign
// change is bracketed.
inline std::vector<double> zero_level_displacement(const InterfaceMesh& mesh, const ScalarField& u,
                                                   SpectralWorkspace& ws, double radius, int samples = 16) {
  auto c = ws.transform(u.values);
  const std::size_t P = mesh.size();
  std::vector<std::array<double, 3>> pts;
  pts.reserve(P * (2 * samples + 1));
  for (std::size_t i = 0; i < P; ++i)
    for (int s = -samples; s <= samples; ++s) {
      std::array<double, 3> p{};
      for (int a = 0; a < mesh.dim; ++a) p[a] = mesh.points[i][a] + radius * s / samples * mesh.normals[i][a];
      pts.push_back(detail::wrap(p, mesh.dim));
    }
  auto vals = ws.interpolate_coeffs(c, pts);
  std::vector<double> out(P, std::numeric_limits<double>::quiet_NaN());
  parallel_for(P, [&](std::size_t i) {
    const double* f = &vals[i * (2 * samples + 1)];
    auto at = [&](double t) {
      std::array<double, 3> p{};
      for (int a = 0; a < mesh.dim; ++a) p[a] = mesh.points[i][a] + t * mesh.normals[i][a];
      return ws.interpolate_coeffs(c, {detail::wrap(p, mesh.dim)})[0];
    };
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 2 * samples; ++s) {
      double fa = f[s], fb = f[s + 1];
      if (fa == 0.0 && std::abs(radius * (s - samples) / samples) < std::abs(best)) best = radius * (s - samples) / samples;
      if ((fa < 0) == (fb < 0) || fb == 0.0) continue;
      double a = radius * (s - samples) / samples, b = radius * (s + 1 - samples) / samples;
      if (std::min(std::abs(a), std::abs(b)) > std::abs(best)) continue;
      for (int it = 0; it < 60 && b - a > 1e-15; ++it) {
        double mid = 0.5 * (a + b), fm = at(mid);
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      double t = 0.5 * (a + b);
      if (std::abs(t) < std::abs(best)) best = t;
    }
    if (std::isfinite(best)) out[i] = best;
  });
  return out;
}

}  // namespace okpattern
