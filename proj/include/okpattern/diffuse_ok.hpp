#pragma once

#include <complex>
#include <limits>
#include <ostream>
#include <string>

#include "sharp_energy.hpp"

namespace okpattern {

struct FlowConfig {
  double eps = 0.04;
  double gamma = 0.0;  // diffuse gamma; the sharp-limit value is gamma / sigma_mm
  double dt = 1e-4;
  double stabilizer = -1.0;  // < 0 selects 2 / eps
  long max_steps = 1000;
  double energy_tolerance = 1e-12;
  double dt_backoff = 0.5;
  double min_dt = 1e-14;

  double stabilizer_value() const { return stabilizer < 0 ? 2.0 / eps : stabilizer; }

  void validate(const GridSpec& g) const {
    if (!(eps > 0)) throw ConfigError("flow.eps must be > 0");
    if (eps < 2.0 * g.max_h()) throw ConfigError("flow.eps below resolvability bound 2h");
    if (!(gamma >= 0)) throw ConfigError("flow.gamma must be >= 0");
    if (!(dt > 0)) throw ConfigError("flow.dt must be > 0");
    if (max_steps < 0) throw ConfigError("flow.max_steps must be >= 0");
    if (!(energy_tolerance >= 0)) throw ConfigError("flow.energy_tolerance must be >= 0");
    if (!(dt_backoff > 0 && dt_backoff < 1)) throw ConfigError("flow.dt_backoff must lie in (0,1)");
  }
};

struct DiffuseEnergy {
  double gradient = 0.0;  // int eps |grad u|^2
  double well = 0.0;      // (1/eps) int (u^2-1)^2
  double nonlocal = 0.0;  // NL(u), without gamma
  double total = 0.0;
};

inline DiffuseEnergy ok_energy_terms(const std::vector<SpectralWorkspace::cplx>& c, const std::vector<double>& u,
                                     double eps, double gamma, SpectralWorkspace& ws) {
  DiffuseEnergy e;
  e.gradient = eps * ws.dirichlet_energy_coeffs(c);
  double w = 0.0;
  for (double x : u) w += (x * x - 1.0) * (x * x - 1.0);
  e.well = w * ws.spec().cell_volume() / eps;
  e.nonlocal = ws.nonlocal_energy_coeffs(c, GreenModel::trigonometric);
  e.total = e.gradient + e.well + gamma * e.nonlocal;
  return e;
}

inline DiffuseEnergy ok_energy_terms(const ScalarField& u, double eps, double gamma, SpectralWorkspace& ws) {
  if (!(eps > 0)) throw ConfigError("ok_energy: eps must be > 0");
  if (!(gamma >= 0)) throw ConfigError("ok_energy: gamma must be >= 0");
  if (!(u.spec == ws.spec())) throw ConfigError("ok_energy: field does not match workspace grid");
  return ok_energy_terms(ws.transform(u.values), u.values, eps, gamma, ws);
}

inline double ok_energy(const ScalarField& u, double eps, double gamma, SpectralWorkspace& ws) {
  return ok_energy_terms(u, eps, gamma, ws).total;
}

enum class FlowStatus { running, converged, max_steps, stalled };

inline const char* status_name(FlowStatus s) {
  switch (s) {
    case FlowStatus::running: return "running";
    case FlowStatus::converged: return "converged";
    case FlowStatus::max_steps: return "max_steps";
    case FlowStatus::stalled: return "stalled";
  }
  return "?";
}

struct FlowState {
  ScalarField u;
  double dt = 0.0;
  double energy = 0.0;
  long step = 0;
  long rejected = 0;
  double last_decrease = 0.0;
  double sup_update = 0.0;
  bool stalled = false;
};

inline FlowState make_flow_state(const ScalarField& u0, const FlowConfig& cfg, SpectralWorkspace& ws) {
  cfg.validate(u0.spec);
  FlowState s;
  s.u = u0;
  s.u.kind = FieldKind::phase;
  s.dt = cfg.dt;
  s.energy = ok_energy(s.u, cfg.eps, cfg.gamma, ws);
  return s;
}

// One semi-implicit step of the mass-projected L2 gradient flow of OK_eps:
//   u_t = 2 eps Lap u - (4/eps) u (u^2-1) - 2 gamma v + lambda,
// with (2 eps Lap - c_s) implicit.  The zero mode is copied, so the mass is
// untouched; lambda only shifts that mode and never needs to be formed.
// Steps that raise the energy are rejected and dt is reduced.
inline FlowState flow_step(const FlowState& in, const FlowConfig& cfg, SpectralWorkspace& ws) {
  FlowState s = in;
  s.last_decrease = 0.0;
  s.sup_update = 0.0;
  const auto& u = in.u.values;
  const std::size_t N = u.size();
  const double cs = cfg.stabilizer_value();
  auto c = ws.transform(u);
  std::vector<double> nl(N);
  for (std::size_t i = 0; i < N; ++i) nl[i] = -(4.0 / cfg.eps) * u[i] * (u[i] * u[i] - 1.0) + cs * u[i];
  auto r = ws.transform(nl);
  const auto& green = ws.multiplier(GreenModel::trigonometric);
  for (;;) {
    if (s.dt < cfg.min_dt) {
      s.stalled = true;
      return s;
    }
    std::vector<SpectralWorkspace::cplx> next(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i == 0) {
        next[i] = c[i];
        continue;
      }
      auto rhs = c[i] + s.dt * (r[i] - 2.0 * cfg.gamma * green[i] * c[i]);
      next[i] = rhs / (1.0 + s.dt * (cs + 2.0 * cfg.eps * ws.gradient_symbol(i)));
    }
    auto un = ws.inverse(next);
    double e = ok_energy_terms(next, un, cfg.eps, cfg.gamma, ws).total;
    if (e <= in.energy) {
      double sup = 0.0;
      for (std::size_t i = 0; i < N; ++i) sup = std::max(sup, std::abs(un[i] - u[i]));
      s.u.values = std::move(un);
      s.last_decrease = in.energy - e;
      s.energy = e;
      s.sup_update = sup;
      ++s.step;
      return s;
    }
    s.dt *= cfg.dt_backoff;
    ++s.rejected;
  }
}

struct FlowRecord {
  long step;
  double dt;
  double energy;
  double mass;
  double sup_update;
};

struct FlowTrace {
  std::vector<FlowRecord> records;
  ScalarField final_field;
  FlowStatus status = FlowStatus::running;
  long rejected = 0;

  double final_energy() const { return records.empty() ? 0.0 : records.back().energy; }

  void write_csv(std::ostream& os) const {
    os << "step,dt,energy,mass,sup_update\n";
    char buf[256];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.step, r.dt, r.energy, r.mass, r.sup_update);
      os << buf;
    }
  }
};

inline double field_mass(const ScalarField& u) { return u.mean(); }

// Step 0 records the initial state.
inline FlowTrace minimize(const ScalarField& u0, const FlowConfig& cfg, SpectralWorkspace& ws) {
  FlowState s = make_flow_state(u0, cfg, ws);
  FlowTrace t;
  t.records.push_back({0, 0.0, s.energy, field_mass(s.u), 0.0});
  if (cfg.max_steps == 0) {
    t.final_field = s.u;
    t.status = FlowStatus::max_steps;
    return t;
  }
  while (s.step < cfg.max_steps) {
    s = flow_step(s, cfg, ws);
    if (s.stalled) {
      t.status = FlowStatus::stalled;
      break;
    }
    t.records.push_back({s.step, s.dt, s.energy, field_mass(s.u), s.sup_update});
    if (s.last_decrease < cfg.energy_tolerance) {
      t.status = FlowStatus::converged;
      break;
    }
  }
  if (t.status == FlowStatus::running) t.status = FlowStatus::max_steps;
  t.rejected = s.rejected;
  t.final_field = std::move(s.u);
  return t;
}

// Reference nonlocal energy of a candidate: closed form for lamellae, the
// cell-exact value of the rasterized set on `g` otherwise.
inline double reference_nonlocal(const ShapeCandidate& s, const GridSpec& g) {
  if (const auto* l = std::get_if<Lamella>(&s)) {
    double L = 0.5 - l->w;
    return 16.0 / 3.0 * l->w * l->w * L * L;
  }
  SpectralWorkspace ws(g);
  return ws.nonlocal_energy(rasterize(s, g), GreenModel::voxel);
}

struct GammaLimitRow {
  double eps;
  double diffuse;
  double reference;
  double difference;
};

inline std::vector<GammaLimitRow> gamma_limit_sweep(const ShapeCandidate& s, double gamma,
                                                    const std::vector<double>& eps_list, const GridSpec& g) {
  SpectralWorkspace ws(g);
  const double ref = sigma_mm * perimeter(s, g.dim) + (gamma == 0.0 ? 0.0 : gamma * reference_nonlocal(s, g));
  std::vector<GammaLimitRow> rows;
  for (double eps : eps_list) {
    auto u = tanh_profile(s, g, eps);
    double e = ok_energy(u, eps, gamma, ws);
    rows.push_back({eps, e, ref, std::abs(e - ref)});
  }
  return rows;
}

// Least-squares slope of log(difference) against log(eps).
inline double fitted_order(const std::vector<GammaLimitRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    double x = std::log(r.eps), y = std::log(r.difference);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Dynamic instability of the lamella {|x_0 - 1/2| < w} in 2D.  Both interfaces
// are displaced by small, distinct combinations of transverse modes q = 1..3
// and the flow is run.  The linearised flow does not mix transverse
// wavenumbers or the parity under x_0 -> 1 - x_0, so the transverse part is
// split into those sectors; inside one sector the interface mode dominates
// after a short transient and its late-time exponential rate is read off.  The
// onset is the smallest gamma at which some sector grows, located by
// bracketing and false-position refinement.
struct OnsetConfig {
  double eps = 0.02;
  std::size_t nx = 192;
  std::size_t ny = 112;
  double dt = 1e-3;
  double horizon = 2.0;  // rates measured over [horizon/2, horizon]
  double amplitude = 1e-2;
  int qmax = 3;
  double gamma_start = 10.0;  // sharp units
  double gamma_max = 1e4;
  double rel_tol = 2e-3;
};

struct OnsetSample {
  double gamma;  // sharp units
  double rate;   // largest sector rate
  int q;         // its transverse wavenumber
  bool odd;      // its parity
  bool stalled;
};

struct OnsetResult {
  bool found = false;
  double gamma = 0.0;  // sharp units; diffuse gamma is sigma_mm times this
  std::vector<OnsetSample> samples;
};

// L2 norms of the even and odd parts of the q-th transverse Fourier mode,
// ordered (q=1 even, q=1 odd, q=2 even, ...).
inline std::vector<double> sector_amplitudes(const ScalarField& u, int qmax) {
  const GridSpec& g = u.spec;
  const std::size_t nx = g.n[0], ny = g.n[1];
  std::vector<double> out;
  for (int q = 1; q <= qmax; ++q) {
    std::vector<std::complex<double>> m(nx);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        double y = 2 * pi * q * (static_cast<double>(j) + 0.5) / static_cast<double>(ny);
        m[i] += u[g.index(i, j)] * std::complex<double>(std::cos(y), -std::sin(y));
      }
    double ev = 0, od = 0;
    for (std::size_t i = 0; i < nx; ++i) {
      ev += std::norm(m[i] + m[nx - 1 - i]);
      od += std::norm(m[i] - m[nx - 1 - i]);
    }
    out.push_back(std::sqrt(ev));
    out.push_back(std::sqrt(od));
  }
  return out;
}

inline ScalarField perturbed_lamella(double w, double eps, const GridSpec& g, double amp) {
  ScalarField u(g, FieldKind::phase);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.center(i);
    const double y = 2 * pi * x[1];
    double dl = amp * (std::cos(y) + 0.7 * std::sin(2 * y) + 0.4 * std::cos(3 * y));
    double dr = amp * (0.8 * std::sin(y) - 0.6 * std::cos(2 * y) + 0.5 * std::sin(3 * y));
    double d = std::min(x[0] - (0.5 - w + dl), (0.5 + w + dr) - x[0]);
    u[i] = std::tanh(d / eps);
  }
  return u;
}

inline OnsetSample transverse_growth_rate(double w, double gamma_sharp, const OnsetConfig& oc, SpectralWorkspace& ws) {
  const GridSpec& g = ws.spec();
  FlowConfig fc;
  fc.eps = oc.eps;
  fc.gamma = sigma_mm * gamma_sharp;
  fc.dt = oc.dt;
  fc.energy_tolerance = 0.0;
  auto s = make_flow_state(perturbed_lamella(w, oc.eps, g, oc.amplitude), fc, ws);
  const long steps = static_cast<long>(std::llround(oc.horizon / oc.dt));
  auto best = [&](const std::vector<double>& a, const std::vector<double>& b, double dt, bool stalled) {
    OnsetSample r{gamma_sharp, -std::numeric_limits<double>::infinity(), 0, false, stalled};
    for (std::size_t k = 0; k < a.size(); ++k) {
      double rate = std::log(b[k] / a[k]) / dt;
      if (rate > r.rate) r = {gamma_sharp, rate, static_cast<int>(k / 2 + 1), k % 2 == 1, stalled};
    }
    return r;
  };
  // A stall means the energy no longer moves above rounding: the perturbation
  // has died out or sits at neutrality.  Rates since t = 0 tell them apart.
  const auto a0 = sector_amplitudes(s.u, oc.qmax);
  std::vector<double> a1;
  double t1 = 0.0, t = 0.0;
  for (long k = 1; k <= steps; ++k) {
    s = flow_step(s, fc, ws);
    if (s.stalled) {
      if (t == 0.0) return {gamma_sharp, 0.0, 0, false, true};
      return best(a0, sector_amplitudes(s.u, oc.qmax), t, true);
    }
    t += s.dt;
    if (k == steps / 2) {
      a1 = sector_amplitudes(s.u, oc.qmax);
      t1 = t;
    }
  }
  return best(a1, sector_amplitudes(s.u, oc.qmax), t - t1, false);
}

inline OnsetResult flow_instability_onset(double w, const OnsetConfig& oc) {
  if (!(w > 0 && w < 0.5)) throw ConfigError("onset: w must lie in (0, 1/2)");
  SpectralWorkspace ws(GridSpec({oc.nx, oc.ny}));
  OnsetResult r;
  auto probe = [&](double gamma) {
    r.samples.push_back(transverse_growth_rate(w, gamma, oc, ws));
    return r.samples.back();
  };
  OnsetSample lo = probe(0.0);
  if (lo.rate >= 0) return r;
  OnsetSample hi{};
  for (double gamma = oc.gamma_start;; gamma *= 2) {
    if (gamma > oc.gamma_max) return r;
    hi = probe(gamma);
    if (hi.rate >= 0) break;
    lo = hi;
  }
  // Rates are close to affine in gamma, so false position converges fast; the
  // Illinois halving keeps it from stalling on one side.
  int side = 0;
  while (hi.gamma - lo.gamma > oc.rel_tol * hi.gamma) {
    double gamma = hi.gamma - hi.rate * (hi.gamma - lo.gamma) / (hi.rate - lo.rate);
    gamma = std::clamp(gamma, lo.gamma + 0.01 * (hi.gamma - lo.gamma), hi.gamma - 0.01 * (hi.gamma - lo.gamma));
    OnsetSample m = probe(gamma);
    if (std::abs(m.rate) < 1e-9) {
      lo = hi = m;
      break;
    }
    if (m.rate > 0) {
      hi = m;
      if (side == 1) lo.rate *= 0.5;
      side = 1;
    } else {
      lo = m;
      if (side == -1) hi.rate *= 0.5;
      side = -1;
    }
  }
  r.found = true;
  r.gamma = hi.gamma == lo.gamma ? hi.gamma : lo.gamma - lo.rate * (hi.gamma - lo.gamma) / (hi.rate - lo.rate);
  return r;
}

}  // namespace okpattern
