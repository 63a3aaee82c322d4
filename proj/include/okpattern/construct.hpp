#pragma once

#include <random>

#include "diffuse_ok.hpp"
#include "set_distance.hpp"
#include "stability.hpp"

namespace okpattern {

// gamma_bar and the continuation values are in sharp units (F = P + gamma NL);
// the flow runs at diffuse gamma sigma_mm * gamma.
struct ConstructConfig {
  ShapeCandidate seed = Lamella{0, 0.5, 0.1875};
  double gamma_bar = 40.0;
  std::vector<int> ks{1, 2, 4};
  GridSpec grid{std::vector<std::size_t>{256, 256}};  // grid of the tiled set F
  FlowConfig flow{.eps = 0.04, .gamma = 0.0, .dt = 1e-2, .stabilizer = -1.0, .max_steps = 4000,
                  .energy_tolerance = 1e-13, .dt_backoff = 0.5, .min_dt = 1e-14};
  int continuation_steps = 4;
  double kick = 1e-3;         // transverse perturbation added before each member
  double escape_alpha = 0.02; // alpha to the previous member that counts as escape
  int mesh_resolution = 32;
  double level = 0.0;         // starting level for sharpening
  int stability_resolution = 32;

  void validate() const {
    validate_shape(seed, grid.dim);
    grid.validate();
    if (!(gamma_bar > 0)) throw ConfigError("construct.gamma_bar must be > 0");
    if (ks.empty()) throw ConfigError("construct.k must not be empty");
    for (int k : ks) {
      if (k < 1) throw ConfigError("construct.k entries must be >= 1");
      flow.validate(grid.divided(static_cast<std::size_t>(k)));
    }
    if (continuation_steps < 1) throw ConfigError("construct.continuation_steps must be >= 1");
    if (!(kick >= 0)) throw ConfigError("construct.kick must be >= 0");
    if (!(escape_alpha > 0)) throw ConfigError("construct.escape_alpha must be > 0");
    if (mesh_resolution < 8 || mesh_resolution % 2) throw ConfigError("construct.mesh_resolution must be even and >= 8");
    if (stability_resolution < 16 || stability_resolution % 2)
      throw ConfigError("construct.stability_resolution must be even and >= 16");
  }
};

enum class FamilyStatus { complete, escaped, stalled };

inline const char* family_status_name(FamilyStatus s) {
  switch (s) {
    case FamilyStatus::complete: return "complete";
    case FamilyStatus::escaped: return "escaped";
    case FamilyStatus::stalled: return "stalled";
  }
  return "?";
}

struct FamilyMember {
  double gamma = 0.0;          // sharp units
  ScalarField phase;           // relaxed phase field
  ScalarField set;             // sharpened indicator
  double alpha_prev = 0.0;     // alpha to the previous member (0 for the first)
  double phase_step = 0.0;     // translation-reduced L1 distance of phase fields to the previous member
  double alpha_seed = 0.0;     // alpha to the rasterized seed
  FlowStatus flow_status = FlowStatus::running;
  long flow_steps = 0;
};

struct Family {
  std::vector<FamilyMember> members;  // accepted members only
  FamilyStatus status = FamilyStatus::complete;
  double truncated_at = 0.0;          // first rejected gamma, when not complete
};

namespace detail {
// Zero-mean transverse pattern concentrated on the diffuse interface.
inline void add_kick(ScalarField& u, double amp) {
  if (amp == 0.0) return;
  const GridSpec& g = u.spec;
  std::vector<double> k(g.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.center(i);
    double p = 0.0;
    for (int a = 0; a < g.dim; ++a) p += std::cos(2 * pi * x[a]);
    k[i] = amp * (1 - u[i] * u[i]) * p;
    mean += k[i];
  }
  mean /= static_cast<double>(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) u[i] += k[i] - mean;
}
}  // namespace detail

// Warm-started continuation gamma_0 = 0 < gamma_1 < ... on the grid of ws.
// Each member starts from the previous relaxed field plus a small transverse
// kick, so a member past the stability threshold drifts away instead of
// sitting on an unstable symmetric state.  The family is truncated at the
// first member whose alpha to its predecessor exceeds escape_alpha, or whose
// flow stalls.
inline Family continue_family(const ShapeCandidate& seed, const std::vector<double>& gammas, const FlowConfig& tmpl,
                              SpectralWorkspace& ws, double kick = 1e-3, double escape_alpha = 0.02) {
  const GridSpec& g = ws.spec();
  if (gammas.empty()) throw ConfigError("continue_family: empty gamma list");
  if (gammas.front() != 0.0) throw ConfigError("continue_family: gamma list must start at 0");
  for (std::size_t i = 1; i < gammas.size(); ++i)
    if (!(gammas[i] > gammas[i - 1])) throw ConfigError("continue_family: gamma list must be increasing");
  tmpl.validate(g);
  const double volume = shape_volume(seed, g.dim);
  const ScalarField seed_set = rasterize(seed, g);
  Family fam;
  ScalarField u = tanh_profile(seed, g, tmpl.eps);
  for (double gamma : gammas) {
    FlowConfig c = tmpl;
    c.gamma = sigma_mm * gamma;
    ScalarField start = u;
    detail::add_kick(start, kick);
    auto trace = minimize(start, c, ws);
    FamilyMember m;
    m.gamma = gamma;
    m.phase = trace.final_field;
    m.set = sharpen(m.phase, volume);
    m.flow_status = trace.status;
    m.flow_steps = trace.records.back().step;
    m.alpha_seed = alpha_distance(m.set, seed_set);
    if (!fam.members.empty()) {
      m.alpha_prev = alpha_distance(m.set, fam.members.back().set);
      m.phase_step = l1_translation_distance(m.phase, fam.members.back().phase);
    }
    if (trace.status == FlowStatus::stalled) {
      fam.status = FamilyStatus::stalled;
      fam.truncated_at = gamma;
      return fam;
    }
    if (m.alpha_prev > escape_alpha) {
      fam.status = FamilyStatus::escaped;
      fam.truncated_at = gamma;
      return fam;
    }
    u = m.phase;
    fam.members.push_back(std::move(m));
  }
  return fam;
}

// Candidate of the seed's type with the volume of E and its circular-mean
// center: the analytic carrier of curvature for a flow output.
inline ShapeCandidate fit_candidate(const ShapeCandidate& seed, const ScalarField& E) {
  const GridSpec& g = E.spec;
  const double V = volume_of(E);
  auto circ = [&](int a) {
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (E[i] > 0) s += std::polar(1.0, 2 * pi * g.center(i)[a]);
    return frac(std::arg(s) / (2 * pi));
  };
  if (const auto* l = std::get_if<Lamella>(&seed)) return Lamella{l->axis, circ(l->axis), V / 2};
  if (std::get_if<Ball>(&seed)) {
    Ball b;
    for (int a = 0; a < g.dim; ++a) b.center[a] = circ(a);
    b.r = g.dim == 1 ? V / 2 : g.dim == 2 ? std::sqrt(V / pi) : std::cbrt(3 * V / (4 * pi));
    return b;
  }
  Cylinder c = std::get<Cylinder>(seed);
  auto ax = cross_axes(c.axis);
  c.center = {circ(ax[0]), circ(ax[1])};
  c.r = std::sqrt(V / pi);
  return c;
}

struct ConstructCertificate {
  int k = 1;
  double gamma_k = 0.0;
  double alpha = 0.0;         // alpha(E_{gamma_k}, seed)
  double c0_proxy = 0.0;      // sup normal displacement of the zero level of F from the tiled seed
  double residual_sup = 0.0;  // of the tiled set at gamma_bar
  double grad_H_sup = 0.0;
  double lambda = 0.0;
  double energy_lhs = 0.0;    // F^gamma_bar(F) on the fine grid
  double energy_rhs = 0.0;    // k [P(E) + gamma_k NL(E)] on the parent grid
  double rel_err = 0.0;
  double nl_rel_err = 0.0;    // NL(F) against k^-2 NL(E)
  std::string status = "ok";
  ScalarField phase;          // E_{gamma_k} before sharpening (parent grid)
  ScalarField set;            // E_{gamma_k}
  ScalarField tiled;          // F

  static const char* csv_header() {
    return "k,gamma_k,alpha,c0_proxy,residual_sup,grad_H_sup,energy_lhs,energy_rhs,rel_err,status";
  }
  void write_csv_row(std::ostream& os) const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", k, gamma_k, alpha,
                  c0_proxy, residual_sup, grad_H_sup, energy_lhs, energy_rhs, rel_err, status.c_str());
    os << buf;
  }
};

struct ConstructResult {
  double seed_min_eigenvalue = 0.0;
  std::vector<ConstructCertificate> certificates;
};

// Strict-stability gate: the seed's second variation of area on T-perp.
inline double seed_stability(const ShapeCandidate& seed, const GridSpec& g, int m) {
  return min_eigenvalue(seed, 0.0, g, m).value;
}

inline ConstructCertificate build_one(const ConstructConfig& cfg, int k) {
  ConstructCertificate c;
  c.k = k;
  const double kd = k;
  c.gamma_k = cfg.gamma_bar / (kd * kd * kd);
  try {
    const GridSpec parent = cfg.grid.divided(static_cast<std::size_t>(k));
    SpectralWorkspace wp(parent);
    std::vector<double> gammas;
    for (int j = 0; j <= cfg.continuation_steps; ++j) gammas.push_back(c.gamma_k * j / cfg.continuation_steps);
    auto fam = continue_family(cfg.seed, gammas, cfg.flow, wp, cfg.kick, cfg.escape_alpha);
    if (fam.status != FamilyStatus::complete) {
      c.status = std::string("family_") + family_status_name(fam.status);
      if (fam.members.empty()) return c;
    }
    const auto& last = fam.members.back();
    c.phase = last.phase;
    c.set = last.set;
    c.alpha = last.alpha_seed;
    // Zero level of F against the tiled seed: the displacement on E^k is the
    // parent-grid displacement scaled by 1/k.
    auto seed_mesh = interface_mesh(cfg.seed, parent.dim, cfg.mesh_resolution);
    auto disp = zero_level_displacement(seed_mesh, last.phase, wp, 4 * cfg.flow.eps);
    for (double d : disp) {
      if (std::isnan(d)) {
        c.c0_proxy = std::numeric_limits<double>::infinity();
        break;
      }
      c.c0_proxy = std::max(c.c0_proxy, std::abs(d) / kd);
    }
    c.tiled = tile(c.set, static_cast<std::size_t>(k));
    SpectralWorkspace wt(cfg.grid);
    auto fit = fit_candidate(cfg.seed, c.set);
    auto mesh = tile_mesh(interface_mesh(fit, parent.dim, cfg.mesh_resolution), k);
    auto rep = el_residual(mesh, c.tiled, cfg.gamma_bar, wt, CurvatureGradient::euler_lagrange);
    c.residual_sup = rep.residual_sup;
    c.grad_H_sup = rep.grad_H_sup;
    c.lambda = rep.lambda;
    auto lhs = sharp_energy(c.tiled, cfg.gamma_bar, wt);
    auto rhs = sharp_energy(c.set, c.gamma_k, wp);
    c.energy_lhs = lhs.total;
    c.energy_rhs = kd * rhs.total;
    c.rel_err = std::abs(c.energy_lhs - c.energy_rhs) / std::max(std::abs(c.energy_rhs), 1e-300);
    c.nl_rel_err = std::abs(lhs.nonlocal - rhs.nonlocal / (kd * kd)) / std::max(rhs.nonlocal / (kd * kd), 1e-300);
  } catch (const ConfigError& e) {
    c.status = std::string("config_error: ") + e.what();
  } catch (const std::exception& e) {
    c.status = std::string("numerical_error: ") + e.what();
  }
  return c;
}

// Per-k pipelines are independent; one failing k does not abort the others.
inline ConstructResult build_periodic(const ConstructConfig& cfg) {
  cfg.validate();
  ConstructResult r;
  r.seed_min_eigenvalue = seed_stability(cfg.seed, cfg.grid, cfg.stability_resolution);
  if (!(r.seed_min_eigenvalue > 0)) throw NumericalError("build_periodic: seed is not strictly stable");
  for (int k : cfg.ks) r.certificates.push_back(build_one(cfg, k));
  return r;
}

// ---------------------------------------------------------------------------
// Empirical minimality against 1/k-periodic cell rearrangements.

struct ProbeReport {
  int requested = 0;
  int evaluated = 0;
  int skipped = 0;
  double base_energy = 0.0;
  double min_gap = 0.0;
  double max_gap = 0.0;
  std::vector<double> gaps;
};

namespace detail {
// Inside and outside cells of E (parent grid) lying within `depth` cells, in
// the max norm, of a cell of the other phase.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> swap_band(const ScalarField& E, int depth) {
  const GridSpec& g = E.spec;
  std::vector<std::size_t> in, out;
  if (depth <= 0) return {in, out};
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto j = g.unravel(i);
    bool near = false;
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) lo[a] = -depth, hi[a] = depth;
    for (int d0 = lo[0]; d0 <= hi[0] && !near; ++d0)
      for (int d1 = lo[1]; d1 <= hi[1] && !near; ++d1)
        for (int d2 = lo[2]; d2 <= hi[2] && !near; ++d2) {
          std::array<std::size_t, 3> q{};
          const int d[3] = {d0, d1, d2};
          for (int a = 0; a < 3; ++a) {
            long n = static_cast<long>(g.n[a]);
            q[a] = static_cast<std::size_t>(((static_cast<long>(j[a]) + d[a]) % n + n) % n);
          }
          if (E[g.index(q[0], q[1], q[2])] != E[i]) near = true;
        }
    if (near) (E[i] > 0 ? in : out).push_back(i);
  }
  return {in, out};
}

// Restriction of a 1/k-periodic field to one periodicity cell.
inline ScalarField restrict_cell(const ScalarField& F, int k) {
  GridSpec parent = F.spec.divided(static_cast<std::size_t>(k));
  ScalarField E(parent, F.kind);
  for (std::size_t i = 0; i < parent.size(); ++i) {
    auto j = parent.unravel(i);
    E[i] = F[F.spec.index(j[0], j[1], j[2])];
  }
  if (tile(E, static_cast<std::size_t>(k)).values != F.values)
    throw ConfigError("local_minimality_probe: field is not 1/k-periodic");
  return E;
}
}  // namespace detail

// Energy gap F^gamma(G) - F^gamma(F) for G the 1/k-periodic set obtained by
// swapping parent cells a (inside) and b (outside) in every periodicity cell.
inline double swap_gap(const ScalarField& F, double gamma, int k, std::size_t a, std::size_t b, SpectralWorkspace& ws,
                       double base_energy) {
  ScalarField E = detail::restrict_cell(F, k);
  if (!(E[a] > 0) || !(E[b] < 0)) throw ConfigError("swap_gap: a must be inside and b outside");
  E[a] = -1.0;
  E[b] = 1.0;
  return sharp_energy(tile(E, static_cast<std::size_t>(k)), gamma, ws).total - base_energy;
}

// n_probes random volume-preserving 1/k-periodic perturbations of F, each
// moving `amplitude` cells (taken from the band of that depth) across the
// interface.  amplitude 0 leaves F unchanged.
inline ProbeReport local_minimality_probe(const ScalarField& F, double gamma, int k, int n_probes, int amplitude,
                                          std::uint64_t seed = 1) {
  if (F.kind != FieldKind::indicator) throw ConfigError("local_minimality_probe: indicator field required");
  if (amplitude < 0 || amplitude > 3) throw ConfigError("local_minimality_probe: amplitude must lie in [0, 3]");
  if (n_probes < 0) throw ConfigError("local_minimality_probe: n_probes must be >= 0");
  ScalarField E = detail::restrict_cell(F, k);
  SpectralWorkspace ws(F.spec);
  ProbeReport r;
  r.requested = n_probes;
  r.base_energy = sharp_energy(F, gamma, ws).total;
  auto [in, out] = detail::swap_band(E, amplitude);
  std::mt19937_64 rng(seed);
  r.min_gap = std::numeric_limits<double>::infinity();
  r.max_gap = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_probes; ++p) {
    double gap = 0.0;
    if (amplitude > 0) {
      const std::size_t moves = static_cast<std::size_t>(amplitude);
      if (in.size() < moves || out.size() < moves) {
        ++r.skipped;
        continue;
      }
      ScalarField G = E;
      std::vector<std::size_t> a = in, b = out;
      std::shuffle(a.begin(), a.end(), rng);
      std::shuffle(b.begin(), b.end(), rng);
      for (std::size_t m = 0; m < moves; ++m) {
        G[a[m]] = -1.0;
        G[b[m]] = 1.0;
      }
      gap = sharp_energy(tile(G, static_cast<std::size_t>(k)), gamma, ws).total - r.base_energy;
    }
    ++r.evaluated;
    r.gaps.push_back(gap);
    r.min_gap = std::min(r.min_gap, gap);
    r.max_gap = std::max(r.max_gap, gap);
  }
  if (r.evaluated == 0) r.min_gap = r.max_gap = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Graph perturbations of a 2D lamella {|x - c| < w}: both interfaces move by
// eta cos(2 pi q y) (the zigzag, volume preserving).  Energies are computed
// without a grid: the perimeter by quadrature of the arc length and NL by the
// lattice sum of |u^(xi)|^2 / (4 pi^2 |xi|^2), with u^ exact in x and spectrally
// exact in y.

struct GraphProbeRow {
  double eta = 0.0;
  double alpha = 0.0;
  double gap = 0.0;
};

struct GraphProbe {
  double w = 0.0;
  double gamma = 0.0;
  int q = 1;
  std::vector<GraphProbeRow> rows;
  double exponent = 0.0;  // least-squares slope of log gap against log alpha
};

inline double graph_lamella_nonlocal(double w, double eta, int q, int K = 512, int M = 512) {
  ComplexFft1d fft(static_cast<std::size_t>(M));
  using cplx = std::complex<double>;
  const double c = 0.5;
  std::vector<double> a(M), b(M);
  for (int j = 0; j < M; ++j) {
    double y = static_cast<double>(j) / M, s = eta * std::cos(2 * pi * q * y);
    a[j] = c - w + s;
    b[j] = c + w + s;
  }
  double nl = 0.0;
  for (int kx = -K; kx <= K; ++kx) {
    cplx* f = fft.data();
    for (int j = 0; j < M; ++j) {
      if (kx == 0) {
        f[j] = b[j] - a[j];
      } else {
        const double t = 2 * pi * kx;
        f[j] = (std::polar(1.0, -t * a[j]) - std::polar(1.0, -t * b[j])) / cplx(0.0, t);
      }
    }
    fft.forward();
    for (int j = 0; j < M; ++j) {
      int ky = j < M / 2 ? j : j - M;
      if (kx == 0 && ky == 0) continue;
      if (2 * std::abs(ky) == M) continue;
      cplx uh = 2.0 * f[j] / static_cast<double>(M);  // u = 2 chi - 1
      nl += std::norm(uh) / (4 * pi * pi * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky));
    }
  }
  return nl;
}

inline double graph_lamella_perimeter(double eta, int q, int M = 512) {
  double s = 0.0;
  for (int j = 0; j < M; ++j) {
    double d = -eta * 2 * pi * q * std::sin(2 * pi * q * static_cast<double>(j) / M);
    s += std::sqrt(1 + d * d);
  }
  return 2 * s / M;
}

inline GraphProbe graph_probe_growth(double w, double gamma, const std::vector<double>& etas, int q = 1) {
  if (!(w > 0 && w < 0.5)) throw ConfigError("graph_probe_growth: w must lie in (0, 1/2)");
  if (!(gamma >= 0)) throw ConfigError("graph_probe_growth: gamma must be >= 0");
  if (etas.size() < 2) throw ConfigError("graph_probe_growth: need at least two amplitudes");
  GraphProbe g;
  g.w = w;
  g.gamma = gamma;
  g.q = q;
  const double base = graph_lamella_perimeter(0.0, q) + gamma * graph_lamella_nonlocal(w, 0.0, q);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double eta : etas) {
    if (!(eta > 0) || eta >= std::min(w, 0.5 - w)) throw ConfigError("graph_probe_growth: eta out of range");
    GraphProbeRow r;
    r.eta = eta;
    // |E symdiff F| = 2 int |eta cos| over the two interfaces; translations
    // cannot reduce it because the displacement has zero median.
    r.alpha = 2 * eta * 2 / pi;
    r.gap = graph_lamella_perimeter(eta, q) + gamma * graph_lamella_nonlocal(w, eta, q) - base;
    g.rows.push_back(r);
    double x = std::log(r.alpha), y = std::log(std::abs(r.gap));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double n = static_cast<double>(etas.size());
  g.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return g;
}

}  // namespace okpattern
