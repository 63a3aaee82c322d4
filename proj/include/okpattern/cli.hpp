#pragma once

// okpattern command line.
//
//   okpattern energy --shape lamella --w 0.25 --gamma 48 --out runs/e
//   okpattern green --shape ball --r 0.2 --n 128,128 --out runs/g
//   okpattern flow --config configs/flow.json --steps 500 --out runs/f
//   okpattern construct --config configs/construct.json --out runs/c
//   okpattern stability --shape lamella --w 0.25 --gamma-list 0,50,100 --out runs/s
//   okpattern scaling --shape lamella --w 0.25 --gamma 1 --k 1,2,4 --out runs/k
//   okpattern gamma-limit --shape lamella --gamma 1 --eps-list 0.08,0.04,0.02,0.01 --n 512,8
//   okpattern render runs/f/fields/final.okf final.ppm
//
// Every subcommand but render writes <out>/report.csv, <out>/fields/*.okf and
// <out>/meta.txt.  meta.txt can be passed back through --config to repeat a
// run.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "field_io.hpp"
#include "render.hpp"

namespace okpattern {

inline constexpr const char* okpattern_version = "1.0.0";

namespace cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string version_block() {
  std::ostringstream os;
  os << "okpattern " << okpattern_version << "\n"
     << "cli11 " << CLI11_VERSION << "\n"
     << "nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR << "."
     << NLOHMANN_JSON_VERSION_PATCH << "\n"
     << "eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n"
     << "fftw " << fftw_version << "\n";
  return os.str();
}

// A config file is plain JSON or a meta.txt from an earlier run.
inline json load_config_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (text.rfind("okpattern ", 0) == 0) {
    auto at = text.find("\nconfig\n");
    if (at == std::string::npos) throw ConfigError("config: " + path + " has no config block");
    text = text.substr(at + 8);
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline int env_threads() {
  const char* s = std::getenv("OKPATTERN_THREADS");
  if (!s) return 0;
  std::string v(s);
  int n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size() || n < 1)
    throw ConfigError("OKPATTERN_THREADS: expected a positive integer, got '" + v + "'");
  return n;
}

struct Flags {
  std::string config, out = "run";
  std::string shape;
  double w = 0, c = 0, r = 0, gamma = 0, eps = 0, dt = 0, gamma_bar = 0;
  int axis = 0, threads = 0, probes = 0;
  long steps = 0;
  std::vector<std::size_t> n;
  std::vector<int> k;
  std::vector<double> center, gamma_list, eps_list;
  // render
  std::string in_path, out_path;
  int slice_axis = 2;
  std::size_t slice_index = 0;
};

inline void add_common(CLI::App* s, Flags& f) {
  s->add_option("--config", f.config, "JSON config file or meta.txt of an earlier run");
  s->add_option("--out", f.out, "run directory")->capture_default_str();
  s->add_option("--shape", f.shape, "lamella | ball | cylinder");
  s->add_option("--w", f.w, "lamella half-width");
  s->add_option("--c", f.c, "lamella center");
  s->add_option("--r", f.r, "ball or cylinder radius");
  s->add_option("--axis", f.axis, "lamella normal or cylinder axis");
  s->add_option("--center", f.center, "ball or cylinder center")->delimiter(',');
  s->add_option("--n", f.n, "grid sizes, e.g. 128,128")->delimiter(',');
  s->add_option("--threads", f.threads, "worker threads");
}

inline void put(json& j, const std::string& section, const std::string& key, const json& v) {
  if (!j.contains(section) || !j[section].is_object()) j[section] = json::object();
  j[section][key] = v;
}

// Flags override the file, OKPATTERN_THREADS overrides the file's thread
// count, and --threads overrides both.
inline RunConfig resolve(const CLI::App& s, const Flags& f) {
  json j = f.config.empty() ? json::object() : load_config_json(f.config);
  if (!j.is_object()) throw ConfigError("<root>: expected an object");
  auto has = [&](const char* name) { return s.get_option_no_throw(name) && s.count(name) > 0; };
  if (has("--shape")) j["shape"] = {{"type", f.shape}};
  if (has("--w")) put(j, "shape", "w", f.w);
  if (has("--c")) put(j, "shape", "c", f.c);
  if (has("--r")) put(j, "shape", "r", f.r);
  if (has("--axis")) put(j, "shape", "axis", f.axis);
  if (has("--center")) put(j, "shape", "center", f.center);
  if (has("--n")) j["grid"] = f.n;
  if (has("--gamma")) j["gamma"] = f.gamma;
  if (has("--eps")) j["eps"] = f.eps;
  if (has("--dt")) put(j, "flow", "dt", f.dt);
  if (has("--steps")) put(j, "flow", "max_steps", f.steps);
  if (has("--gamma-bar")) put(j, "construct", "gamma_bar", f.gamma_bar);
  if (has("--probes")) put(j, "construct", "probes", f.probes);
  if (has("--gamma-list")) put(j, "stability", "gammas", f.gamma_list);
  if (has("--eps-list")) put(j, "gamma_limit", "eps", f.eps_list);
  if (has("--k")) put(j, s.get_name() == "construct" ? "construct" : "scaling", "k", f.k);
  if (int e = env_threads()) j["threads"] = e;
  if (has("--threads")) j["threads"] = f.threads;
  return config_from_json(j);
}

class RunDir {
 public:
  RunDir(const std::string& root, const std::string& sub, const RunConfig& cfg) : root_(root) {
    std::error_code ec;
    fs::create_directories(root_ / "fields", ec);
    if (ec) throw ConfigError("--out: cannot create " + root_.string() + ": " + ec.message());
    std::string meta = version_block() + "subcommand " + sub + "\nthreads " + std::to_string(cfg.threads) +
                       "\nconfig\n" + dump_config(cfg) + "\n";
    write("meta.txt", meta);
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream os(root_ / name, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + (root_ / name).string() + " for writing");
    os << text;
    if (!os) throw ConfigError("write failed: " + (root_ / name).string());
  }
  void field(const std::string& name, const ScalarField& f) const { write_field(f, root_ / "fields" / (name + ".okf")); }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
};

// --- subcommands -----------------------------------------------------------

inline int cmd_energy(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  SpectralWorkspace ws(cfg.grid_spec());
  auto e = sharp_energy(cfg.shape, cfg.gamma, ws);
  dir.write("report.csv", "perimeter,nonlocal,gamma,total\n" + num(e.perimeter) + "," + num(e.nonlocal) + "," +
                              num(e.gamma) + "," + num(e.total) + "\n");
  dir.field("indicator", rasterize(cfg.shape, cfg.grid_spec()));
  out << "total " << num(e.total) << "\n";
  return 0;
}

inline int cmd_green(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const GridSpec g = cfg.grid_spec();
  SpectralWorkspace ws(g);
  auto u = rasterize(cfg.shape, g);
  auto v = ws.potential(u);
  auto [lo, hi] = std::minmax_element(v.values.begin(), v.values.end());
  const double nl = ws.nonlocal_energy(u);
  dir.write("report.csv", "mass,nonlocal,v_min,v_max\n" + num(u.mean()) + "," + num(nl) + "," + num(*lo) + "," +
                              num(*hi) + "\n");
  dir.field("u", u);
  dir.field("v", v);
  out << "nonlocal " << num(nl) << "\n";
  return 0;
}

inline int cmd_flow(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const GridSpec g = cfg.grid_spec();
  SpectralWorkspace ws(g);
  auto fc = cfg.flow_config();
  fc.validate(g);
  auto u0 = tanh_profile(cfg.shape, g, cfg.eps);
  detail::add_kick(u0, cfg.flow.perturbation);
  auto t = minimize(u0, fc, ws);
  std::ostringstream csv;
  t.write_csv(csv);
  dir.write("report.csv", csv.str());
  dir.field("initial", u0);
  dir.field("final", t.final_field);
  dir.field("final_sharp", sharpen(t.final_field, 0.5 * (1.0 + t.final_field.mean())));
  out << "status " << status_name(t.status) << "\nsteps " << t.records.back().step << "\nrejected " << t.rejected
      << "\nenergy " << num(t.final_energy()) << "\n";
  return t.status == FlowStatus::stalled ? 3 : 0;
}

inline int cmd_construct(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const auto& pc = cfg.construct;
  if (pc.probes > 0 && std::find(pc.k.begin(), pc.k.end(), pc.probe_k) == pc.k.end())
    throw ConfigError("construct.probe_k: must be one of construct.k when probes > 0");
  auto cc = cfg.construct_config();
  auto res = build_periodic(cc);
  std::string csv = std::string(ConstructCertificate::csv_header()) + "\n";
  bool ok = true;
  for (const auto& c : res.certificates) {
    std::ostringstream row;
    c.write_csv_row(row);
    csv += row.str();
    ok = ok && c.status == "ok";
    const std::string tag = "_k" + std::to_string(c.k);
    if (!c.phase.values.empty()) dir.field("phase" + tag, c.phase);
    if (!c.set.values.empty()) dir.field("set" + tag, c.set);
    if (!c.tiled.values.empty()) dir.field("tiled" + tag, c.tiled);
    out << "k " << c.k << " status " << c.status << "\n";
  }
  dir.write("report.csv", csv);
  out << "seed_min_eigenvalue " << num(res.seed_min_eigenvalue) << "\n";
  if (pc.probes > 0) {
    const ConstructCertificate* src = nullptr;
    for (const auto& c : res.certificates)
      if (c.k == pc.probe_k && c.status == "ok") src = &c;
    std::string pcsv = "probe,gap\n";
    if (src) {
      auto pr = local_minimality_probe(src->tiled, cc.gamma_bar, pc.probe_k, pc.probes, pc.probe_amplitude,
                                       pc.probe_seed);
      for (std::size_t i = 0; i < pr.gaps.size(); ++i) pcsv += std::to_string(i) + "," + num(pr.gaps[i]) + "\n";
      out << "probes " << pr.evaluated << " skipped " << pr.skipped << " min_gap " << num(pr.min_gap) << "\n";
    }
    dir.write("probes.csv", pcsv);
  }
  return ok ? 0 : 3;
}

inline int cmd_stability(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const GridSpec g = cfg.grid_spec();
  const auto& sc = cfg.stability;
  const auto* lam = std::get_if<Lamella>(&cfg.shape);
  const bool scan = lam && g.dim == 2;
  SpectralWorkspace ws(g);
  auto mesh = interface_mesh(cfg.shape, g.dim, sc.mesh_resolution);
  auto u = rasterize(cfg.shape, g);
  std::string csv = "gamma,min_eig,penalty_weight,mode_scan\n";
  for (double gamma : sc.gammas) {
    SecondVariation sv(mesh, u, gamma, ws);
    auto e = min_eigenvalue(sv);
    csv += num(gamma) + "," + num(e.value) + "," + num(e.penalty_weight) + "," +
           (scan ? num(lamella_mode_scan(gamma, lam->w, sc.qmax)) : std::string("nan")) + "\n";
  }
  dir.write("report.csv", csv);
  dir.field("indicator", u);
  std::string th = "method,found,gamma,q_abs,zigzag\n";
  auto row = [&](const char* m, const ThresholdResult& t) {
    th += std::string(m) + "," + (t.found ? "1" : "0") + "," + num(t.gamma) + "," + num(t.q_abs) + "," +
          (t.zigzag ? "1" : "0") + "\n";
    out << m << " " << (t.found ? num(t.gamma) : std::string("open")) << "\n";
  };
  if (lam && g.dim >= 2) row("mode_matrix", lamella_threshold(lam->w, g.dim, sc.qmax, sc.gamma_max));
  row("eigen", eigen_threshold(cfg.shape, g, sc.mesh_resolution, sc.gamma_max));
  dir.write("thresholds.csv", th);
  return 0;
}

inline int cmd_scaling(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const GridSpec g = cfg.grid_spec();
  std::string csv = "k,gamma,P_lhs,P_rhs,NL_lhs,NL_rhs,F_lhs,F_rhs,err_P,err_NL,err_F\n";
  for (int k : cfg.scaling_k) {
    auto r = scaling_check(cfg.shape, cfg.gamma, k, g);
    csv += std::to_string(k) + "," + num(r.gamma) + "," + num(r.P_lhs) + "," + num(r.P_rhs) + "," + num(r.NL_lhs) +
           "," + num(r.NL_rhs) + "," + num(r.F_lhs) + "," + num(r.F_rhs) + "," + num(r.err_P) + "," +
           num(r.err_NL) + "," + num(r.err_F) + "\n";
    dir.field("tiled_k" + std::to_string(k), rasterize(cfg.shape, g, k));
    out << "k " << k << " err_F " << num(r.err_F) << "\n";
  }
  dir.write("report.csv", csv);
  return 0;
}

inline int cmd_gamma_limit(const RunConfig& cfg, const RunDir& dir, std::ostream& out) {
  const GridSpec g = cfg.grid_spec();
  for (double e : cfg.gamma_limit_eps)
    if (e < 2.0 * g.max_h()) throw ConfigError("gamma_limit.eps: " + num(e) + " is below the resolvability bound 2h");
  auto rows = gamma_limit_sweep(cfg.shape, cfg.gamma, cfg.gamma_limit_eps, g);
  std::string csv = "eps,diffuse,reference,difference\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv += num(r.eps) + "," + num(r.diffuse) + "," + num(r.reference) + "," + num(r.difference) + "\n";
    dir.field("phase_eps" + std::to_string(i), tanh_profile(cfg.shape, g, r.eps));
  }
  dir.write("report.csv", csv);
  out << "fitted_order " << num(fitted_order(rows)) << "\n";
  return 0;
}

inline int cmd_render(const Flags& f, std::ostream& out) {
  auto field = read_field(f.in_path);
  render_heatmap(field, f.out_path, f.slice_axis, f.slice_index);
  out << "wrote " << f.out_path << "\n";
  return 0;
}

}  // namespace cli

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Ohta-Kawasaki periodic pattern toolkit", "okpattern"};
  app.require_subcommand(1);
  Flags f;
  auto* energy = app.add_subcommand("energy", "sharp energy P + gamma NL of a candidate");
  auto* green = app.add_subcommand("green", "potential of a candidate indicator");
  auto* flow = app.add_subcommand("flow", "diffuse gradient flow from a tanh profile");
  auto* construct = app.add_subcommand("construct", "periodic critical sets by rescaling and continuation");
  auto* stability = app.add_subcommand("stability", "least eigenvalue of the second variation");
  auto* scaling = app.add_subcommand("scaling", "tiling identities for E^k");
  auto* glimit = app.add_subcommand("gamma-limit", "diffuse energy against the sharp limit");
  auto* render = app.add_subcommand("render", "P6 heatmap of a field file");
  for (auto* s : {energy, green, flow, construct, stability, scaling, glimit}) add_common(s, f);
  for (auto* s : {energy, green, flow, scaling, glimit, stability}) s->add_option("--gamma", f.gamma, "nonlocal coefficient");
  for (auto* s : {flow, construct, glimit}) s->add_option("--eps", f.eps, "interface width");
  for (auto* s : {flow, construct}) {
    s->add_option("--dt", f.dt, "time step");
    s->add_option("--steps", f.steps, "flow step budget");
  }
  for (auto* s : {construct, scaling}) s->add_option("--k", f.k, "tiling factors")->delimiter(',');
  construct->add_option("--gamma-bar", f.gamma_bar, "target gamma on the unit torus");
  construct->add_option("--probes", f.probes, "local minimality probes");
  stability->add_option("--gamma-list", f.gamma_list, "gammas to evaluate")->delimiter(',');
  glimit->add_option("--eps-list", f.eps_list, "interface widths")->delimiter(',');
  render->add_option("input", f.in_path, "field file")->required();
  render->add_option("output", f.out_path, "P6 file")->required();
  render->add_option("--axis", f.slice_axis, "slice axis for 3D fields")->capture_default_str();
  render->add_option("--index", f.slice_index, "slice index for 3D fields")->capture_default_str();

  if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
    err << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return 0;
    err << app.help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == render) return cmd_render(f, out);
    RunConfig cfg = resolve(*sub, f);
    set_thread_count(cfg.threads);
    const std::string name = sub->get_name();
    RunDir dir(f.out, name, cfg);
    if (sub == energy) return cmd_energy(cfg, dir, out);
    if (sub == green) return cmd_green(cfg, dir, out);
    if (sub == flow) return cmd_flow(cfg, dir, out);
    if (sub == construct) return cmd_construct(cfg, dir, out);
    if (sub == stability) return cmd_stability(cfg, dir, out);
    if (sub == scaling) return cmd_scaling(cfg, dir, out);
    return cmd_gamma_limit(cfg, dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace okpattern
