#pragma once

#include <Eigen/Dense>
#include <optional>

#include "geometry.hpp"

namespace okpattern {

struct SurfaceFunction {
  std::vector<double> values;
  bool zero_mean = false;
};

inline SurfaceFunction make_surface_function(const InterfaceMesh& mesh, std::vector<double> values) {
  if (values.size() != mesh.size()) throw ConfigError("surface function: size does not match mesh");
  SurfaceFunction f;
  f.values = std::move(values);
  f.zero_mean = std::abs(mesh.integrate(f.values)) <= 1e-10 * mesh.area();
  return f;
}

// Removes the weighted mean.
inline SurfaceFunction project_zero_mean(const InterfaceMesh& mesh, std::vector<double> values) {
  double m = mesh.integrate(values) / mesh.area();
  for (auto& x : values) x -= m;
  return make_surface_function(mesh, std::move(values));
}

struct QuadFormReport {
  double term_perimeter = 0.0;  // int |D phi|^2 - |B|^2 phi^2
  double term_potential = 0.0;  // 4 gamma int d_nu v phi^2
  double term_green = 0.0;      // 8 gamma int int G phi phi
  double penalty = 0.0;         // 2 |int phi nu|^2 (penalized form only)
  double total = 0.0;

  double scale() const { return std::abs(term_perimeter) + std::abs(term_potential) + std::abs(term_green); }
};

// Second variation of P + gamma NL at the set carried by `mesh`, whose
// indicator on the workspace grid is u.  Normal derivatives of v use centred
// differences followed by multilinear interpolation, the adjoint of the
// multilinear splatting used for the Green term; with one shared circulant
// multiplier the two discretisations cancel exactly on translations of
// cell-aligned sets.
class SecondVariation {
 public:
  SecondVariation(InterfaceMesh mesh, const ScalarField& u, double gamma, SpectralWorkspace& ws,
                  GreenModel model = GreenModel::voxel)
      : mesh_(std::move(mesh)), gamma_(gamma), ws_(ws), model_(model) {
    if (!(gamma >= 0)) throw ConfigError("second variation: gamma must be >= 0");
    if (u.kind != FieldKind::indicator) throw ConfigError("second variation: indicator field required");
    if (!(u.spec == ws.spec())) throw ConfigError("second variation: field does not match workspace grid");
    if (mesh_.dim != u.spec.dim) throw ConfigError("second variation: mesh and grid dimensions differ");
    dnu_v_.assign(mesh_.size(), 0.0);
    if (gamma == 0.0) return;
    auto v = ws.potential(u, model);
    std::vector<ScalarField> dv;
    for (int a = 0; a < u.spec.dim; ++a) dv.push_back(central_difference(v, a));
    for (std::size_t i = 0; i < mesh_.size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < u.spec.dim; ++a) s += mesh_.normals[i][a] * interpolate_linear(dv[a], mesh_.points[i]);
      dnu_v_[i] = s;
    }
  }

  const InterfaceMesh& mesh() const { return mesh_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& normal_derivative_v() const { return dnu_v_; }

  // int int G phi phi for the measure phi dA deposited on the grid.
  double green(const std::vector<double>& phi) {
    std::vector<double> mass(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) mass[i] = phi[i] * mesh_.weights[i];
    auto rho = splat(ws_.spec(), mesh_.points, mass);
    double mean = rho.mean();
    double total = 0.0;
    for (double x : rho.values) total += std::abs(x);
    if (std::abs(mean) > 1e-10 * std::max(total / static_cast<double>(rho.values.size()), 1e-300))
      throw NumericalError("second variation: deposited measure is not mean-free");
    for (auto& x : rho.values) x -= mean;
    return ws_.nonlocal_energy_coeffs(ws_.transform(rho.values), model_);
  }

  QuadFormReport quad_form(const SurfaceFunction& f) {
    if (f.values.size() != mesh_.size()) throw ConfigError("quad_form: surface function does not match mesh");
    if (!f.zero_mean) throw ConfigError("quad_form: surface function must have zero mean");
    const auto& phi = f.values;
    QuadFormReport r;
    double b = 0.0, p = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      b += mesh_.weights[i] * mesh_.b2[i] * phi[i] * phi[i];
      p += mesh_.weights[i] * dnu_v_[i] * phi[i] * phi[i];
    }
    r.term_perimeter = mesh_.dirichlet(phi) - b;
    r.term_potential = 4 * gamma_ * p;
    r.term_green = gamma_ == 0.0 ? 0.0 : 8 * gamma_ * green(phi);
    r.total = r.term_perimeter + r.term_potential + r.term_green;
    return r;
  }

  std::array<double, 3> normal_moment(const std::vector<double>& phi) const {
    std::array<double, 3> m{};
    for (std::size_t i = 0; i < phi.size(); ++i)
      for (int a = 0; a < mesh_.dim; ++a) m[a] += mesh_.weights[i] * phi[i] * mesh_.normals[i][a];
    return m;
  }

  // Adds 2 |int phi nu|^2: the second variation of the translation penalty.
  QuadFormReport penalized_quad_form(const SurfaceFunction& f) {
    auto r = quad_form(f);
    auto m = normal_moment(f.values);
    r.penalty = 2 * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
    r.total += r.penalty;
    return r;
  }

  // Dense matrices over nodal values.
  Eigen::MatrixXd stiffness() const {
    const Eigen::Index P = static_cast<Eigen::Index>(mesh_.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(P, P);
    for (const auto& op : mesh_.ops) {
      Eigen::MatrixXd D(op.D);
      Eigen::VectorXd wg(static_cast<Eigen::Index>(op.idx.size()));
      for (std::size_t j = 0; j < op.idx.size(); ++j) wg[j] = mesh_.weights[op.idx[j]] * op.ginv[j];
      Eigen::MatrixXd loc = D.transpose() * wg.asDiagonal() * D;
      for (const auto& line : op.lines) {
        // sum_j wg_j nyq (a (-1)^j)^2 with a = (1/m) sum_j (-1)^j phi_j
        const double m = static_cast<double>(line.size());
        double c = 0.0;
        for (std::size_t j : line) c += wg[j];
        c *= op.nyquist / (m * m);
        for (std::size_t a = 0; a < line.size(); ++a)
          for (std::size_t b = 0; b < line.size(); ++b)
            loc(line[a], line[b]) += ((a + b) % 2 == 0 ? c : -c);
      }
      for (std::size_t a = 0; a < op.idx.size(); ++a)
        for (std::size_t b = 0; b < op.idx.size(); ++b) K(op.idx[a], op.idx[b]) += loc(a, b);
    }
    return K;
  }

  Eigen::MatrixXd green_matrix() {
    const std::size_t P = mesh_.size();
    const GridSpec& g = ws_.spec();
    const auto& mult = ws_.multiplier(model_);
    Eigen::MatrixXd G(P, P);
    std::vector<Stencil> st(P);
    for (std::size_t q = 0; q < P; ++q) st[q] = multilinear_stencil(g, mesh_.points[q]);
    for (std::size_t p = 0; p < P; ++p) {
      ScalarField rho = splat(g, {mesh_.points[p]}, {mesh_.weights[p]});
      auto c = ws_.transform(rho.values);
      for (std::size_t i = 0; i < c.size(); ++i) c[i] *= mult[i];
      auto psi = ws_.inverse(c);
      for (std::size_t q = 0; q < P; ++q) {
        double s = 0.0;
        for (int j = 0; j < st[q].count; ++j) s += st[q].w[j] * psi[st[q].idx[j]];
        G(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = s * mesh_.weights[q];
      }
    }
    return 0.5 * (G + G.transpose());
  }

 private:
  InterfaceMesh mesh_;
  double gamma_;
  SpectralWorkspace& ws_;
  GreenModel model_;
  std::vector<double> dnu_v_;
};

struct EigenResult {
  double value = 0.0;
  double penalty_weight = 0.0;
  std::vector<double> vector;  // nodal values, zero mean, unit H1 norm
};

enum class Norm { h1, gradient };

// Smallest eigenvalue of the penalized second variation against the H1 (or
// gradient-only) Gram matrix on zero-mean nodal functions.  The translation
// penalty weight grows until the minimiser is orthogonal to every nu_i, at
// which point the value is the discrete inf over T-perp.
inline EigenResult min_eigenvalue(SecondVariation& sv, Norm norm = Norm::h1) {
  const auto& mesh = sv.mesh();
  const Eigen::Index P = static_cast<Eigen::Index>(mesh.size());
  if (P < 16) throw ConfigError("min_eigenvalue: mesh too coarse");
  Eigen::VectorXd w(P), dv(P), b2(P);
  for (Eigen::Index i = 0; i < P; ++i) {
    w[i] = mesh.weights[i];
    dv[i] = sv.normal_derivative_v()[i];
    b2[i] = mesh.b2[i];
  }
  Eigen::MatrixXd K = sv.stiffness();
  Eigen::MatrixXd A = K;
  A.diagonal() += (-b2.cwiseProduct(w) + 4 * sv.gamma() * dv.cwiseProduct(w));
  if (sv.gamma() != 0.0) A += 8 * sv.gamma() * sv.green_matrix();
  Eigen::MatrixXd B = K;
  if (norm == Norm::h1) B.diagonal() += w;
  Eigen::MatrixXd N(P, mesh.dim);
  for (Eigen::Index i = 0; i < P; ++i)
    for (int a = 0; a < mesh.dim; ++a) N(i, a) = w[i] * mesh.normals[i][a];
  // Orthonormal basis of {phi : w . phi = 0}.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  Eigen::MatrixXd Z = qr.householderQ() * Eigen::MatrixXd::Identity(P, P);
  Z = Z.rightCols(P - 1).eval();
  Eigen::MatrixXd Az = Z.transpose() * A * Z, Bz = Z.transpose() * B * Z, Nz = Z.transpose() * N;
  Bz = 0.5 * (Bz + Bz.transpose());
  double scale = std::max(1.0, Az.cwiseAbs().maxCoeff() / std::max(1e-300, Nz.cwiseAbs2().maxCoeff()));
  EigenResult r;
  for (double rho = scale; rho < 1e12 * scale; rho *= 100) {
    Eigen::MatrixXd Ap = Az + 2 * rho * Nz * Nz.transpose();
    Ap = 0.5 * (Ap + Ap.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ap, Bz);
    if (es.info() != Eigen::Success) throw NumericalError("min_eigenvalue: eigen-solve failed");
    Eigen::VectorXd y = es.eigenvectors().col(0);
    Eigen::VectorXd phi = Z * y;
    double nrm = std::sqrt(std::max(1e-300, phi.dot(B * phi)));
    phi /= nrm;
    double moment = (N.transpose() * phi).norm();
    r.value = es.eigenvalues()[0];
    r.penalty_weight = rho;
    r.vector.assign(phi.data(), phi.data() + P);
    if (moment <= 1e-8 * std::sqrt(w.sum())) return r;
  }
  throw NumericalError("min_eigenvalue: translation modes could not be separated");
}

inline EigenResult min_eigenvalue(const ShapeCandidate& s, double gamma, const GridSpec& g, int m,
                                  Norm norm = Norm::h1) {
  if (m < 16) throw ConfigError("min_eigenvalue: resolution must be >= 16");
  SpectralWorkspace ws(g);
  SecondVariation sv(interface_mesh(s, g.dim, m), rasterize(s, g), gamma, ws);
  return min_eigenvalue(sv, norm);
}

// ---------------------------------------------------------------------------
// Lamella modes.  For phi_pm e^{2 pi i q.x'} on the two interfaces (outward
// normals, unit cross-section) the form reduces to a 2x2 matrix.  Along the
// normal axis the Green function of -d^2/dx^2 + kappa^2, kappa = 2 pi |q|, on
// the unit circle is g_q(d) = cosh(kappa (1/2 - |d|)) / (2 kappa sinh(kappa/2));
// at q = 0 it is the zero-mean kernel d^2/2 - |d|/2 + 1/12.

inline double screened_green(double q_abs, double d) {
  d = std::abs(periodic_offset(d));
  if (q_abs == 0.0) return d * d / 2 - d / 2 + 1.0 / 12;
  const double k = 2 * pi * q_abs;
  // cosh(k(1/2-d)) / sinh(k/2) without overflow for large k.
  double num = std::exp(-k * d) * (1 + std::exp(-k * (1 - 2 * d)));
  double den = 1 - std::exp(-k);
  return num / den / (2 * k);
}

struct ModeMatrix {
  double q_abs = 0.0;
  double gamma = 0.0;
  double w = 0.0;
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();

  // Varicose (phi_+ = phi_-) and zigzag (phi_+ = -phi_-) eigenvalues.
  double varicose() const { return M(0, 0) + M(0, 1); }
  double zigzag() const { return M(0, 0) - M(0, 1); }
  double min_eig() const { return std::min(varicose(), zigzag()); }
};

// q = 0 is the translation sector; only its zigzag (mean-free) entry is
// admissible and it must be requested explicitly.
inline ModeMatrix lamella_mode_matrix(const std::vector<int>& q, double gamma, double w, bool zero_sector = false) {
  if (!(w > 0 && w < 0.5)) throw ConfigError("mode matrix: w must lie in (0, 1/2)");
  if (!(gamma >= 0)) throw ConfigError("mode matrix: gamma must be >= 0");
  double q2 = 0.0;
  for (int x : q) q2 += static_cast<double>(x) * x;
  if (q2 == 0.0 && !zero_sector) throw ConfigError("mode matrix: q = 0 requires the zero-sector flag");
  ModeMatrix mm;
  mm.q_abs = std::sqrt(q2);
  mm.gamma = gamma;
  mm.w = w;
  const double L = 0.5 - w;
  // d_nu v = -4 w L on both interfaces of the centred-mass lamella.
  const double diag = 4 * pi * pi * q2 + 4 * gamma * (-4 * w * L) + 8 * gamma * screened_green(mm.q_abs, 0.0);
  const double off = 8 * gamma * screened_green(mm.q_abs, 2 * w);
  mm.M << diag, off, off, diag;
  return mm;
}

struct ThresholdResult {
  bool found = false;  // false: no crossing below gamma_max (open)
  double gamma = 0.0;
  double q_abs = 0.0;
  bool zigzag = true;
};

// Least mode eigenvalue over integer q in [-qmax, qmax]^(dim-1), q != 0, plus
// the q = 0 translation sector.
inline double lamella_mode_min(double gamma, double w, int dim, int qmax, double* q_at = nullptr,
                               bool* zig_at = nullptr) {
  double best = lamella_mode_matrix({0}, gamma, w, true).zigzag();
  if (q_at) *q_at = 0.0;
  if (zig_at) *zig_at = true;
  const int span = 2 * qmax + 1;
  int count = 1;
  for (int a = 1; a < dim; ++a) count *= span;
  for (int c = 0; c < count; ++c) {
    std::vector<int> q;
    int r = c;
    for (int a = 1; a < dim; ++a) {
      q.push_back(r % span - qmax);
      r /= span;
    }
    bool zero = true;
    for (int x : q) zero = zero && x == 0;
    if (zero) continue;
    auto mm = lamella_mode_matrix(q, gamma, w);
    for (bool zig : {true, false}) {
      double e = zig ? mm.zigzag() : mm.varicose();
      if (e < best) {
        best = e;
        if (q_at) *q_at = mm.q_abs;
        if (zig_at) *zig_at = zig;
      }
    }
  }
  return best;
}

inline ThresholdResult lamella_threshold(double w, int dim = 2, int qmax = 16, double gamma_max = 1e4,
                                         double rel_tol = 1e-6) {
  if (!(w > 0 && w < 0.5)) throw ConfigError("lamella_threshold: w must lie in (0, 1/2)");
  if (dim < 2 || dim > 3) throw ConfigError("lamella_threshold: dim must be 2 or 3");
  // The translation sector is identically zero; crossings are sign changes
  // beyond rounding relative to the local term.
  auto unstable = [&](double g) { return lamella_mode_min(g, w, dim, qmax) < -1e-9 * 4 * pi * pi; };
  ThresholdResult r;
  if (!unstable(gamma_max)) return r;
  double lo = 0.0, hi = gamma_max;
  while (hi - lo > rel_tol * hi) {
    double mid = 0.5 * (lo + hi);
    (unstable(mid) ? hi : lo) = mid;
  }
  r.found = true;
  r.gamma = 0.5 * (lo + hi);
  lamella_mode_min(hi, w, dim, qmax, &r.q_abs, &r.zigzag);
  return r;
}

// Direct scan of the H1-normalised mode eigenvalues, the oracle for
// min_eigenvalue on lamellae: mode q has H1 weight 4 pi^2 q^2 + 1.
inline double lamella_mode_scan(double gamma, double w, int qmax) {
  double best = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= qmax; ++q) {
    auto mm = lamella_mode_matrix({q}, gamma, w);
    best = std::min(best, mm.min_eig() / (4 * pi * pi * q * q + 1));
  }
  return best;
}

// Threshold of a candidate from the sign of min_eigenvalue, by bisection.
inline ThresholdResult eigen_threshold(const ShapeCandidate& s, const GridSpec& g, int m, double gamma_hi,
                                       double rel_tol = 1e-3) {
  SpectralWorkspace ws(g);
  auto mesh = interface_mesh(s, g.dim, m);
  auto u = rasterize(s, g);
  auto value = [&](double gamma) {
    SecondVariation sv(mesh, u, gamma, ws);
    return min_eigenvalue(sv).value;
  };
  ThresholdResult r;
  if (value(gamma_hi) >= 0) return r;
  double lo = 0.0, hi = gamma_hi;
  while (hi - lo > rel_tol * hi) {
    double mid = 0.5 * (lo + hi);
    (value(mid) < 0 ? hi : lo) = mid;
  }
  r.found = true;
  r.gamma = 0.5 * (lo + hi);
  return r;
}

}  // namespace okpattern
