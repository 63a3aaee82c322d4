#pragma once

#include <json.hpp>
#include <set>
#include <string>

#include "construct.hpp"

namespace okpattern {

// gamma multiplies NL in whichever energy a command evaluates: the sharp
// F = P + gamma NL (energy, scaling, stability) or the diffuse OK_eps (flow,
// gamma-limit).  construct has its own gamma_bar in sharp units.
struct RunConfig {
  int threads = 1;
  std::vector<std::size_t> grid{64, 64};
  ShapeCandidate shape = Lamella{0, 0.5, 0.25};
  double gamma = 1.0;
  double eps = 0.04;

  struct Flow {
    double dt = 1e-3;
    long max_steps = 1000;
    double energy_tolerance = 1e-12;
    double stabilizer = -1.0;
    double dt_backoff = 0.5;
    double min_dt = 1e-14;
    double perturbation = 0.0;  // amplitude of a transverse cos(2 pi x_last) kick
  } flow;

  struct Construct {
    double gamma_bar = 40.0;
    std::vector<int> k{1, 2, 4};
    int continuation_steps = 4;
    double kick = 1e-3;
    double escape_alpha = 0.02;
    int mesh_resolution = 32;
    int stability_resolution = 32;
    int probes = 200;
    int probe_amplitude = 1;
    int probe_k = 2;
    std::uint64_t probe_seed = 1;
  } construct;

  struct Stability {
    int mesh_resolution = 32;
    int qmax = 16;
    double gamma_max = 1e4;
    std::vector<double> gammas{0.0, 10.0, 50.0, 100.0};
  } stability;

  std::vector<int> scaling_k{1, 2, 4};
  std::vector<double> gamma_limit_eps{0.08, 0.04, 0.02, 0.01};

  GridSpec grid_spec() const { return GridSpec(grid); }

  FlowConfig flow_config() const {
    FlowConfig f;
    f.eps = eps;
    f.gamma = gamma;
    f.dt = flow.dt;
    f.max_steps = flow.max_steps;
    f.energy_tolerance = flow.energy_tolerance;
    f.stabilizer = flow.stabilizer;
    f.dt_backoff = flow.dt_backoff;
    f.min_dt = flow.min_dt;
    return f;
  }

  ConstructConfig construct_config() const {
    ConstructConfig c;
    c.seed = shape;
    c.gamma_bar = construct.gamma_bar;
    c.ks = construct.k;
    c.grid = grid_spec();
    c.flow = flow_config();
    c.flow.gamma = 0.0;
    c.continuation_steps = construct.continuation_steps;
    c.kick = construct.kick;
    c.escape_alpha = construct.escape_alpha;
    c.mesh_resolution = construct.mesh_resolution;
    c.stability_resolution = construct.stability_resolution;
    return c;
  }
};

namespace detail {

using json = nlohmann::json;

// Reads keys out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where("") + ": expected an object");
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where(k) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

inline ShapeCandidate parse_shape(const json& j, int dim) {
  ObjectReader r(j, "shape");
  std::string type = "lamella";
  r.get("type", type);
  ShapeCandidate s;
  if (type == "lamella") {
    Lamella l;
    r.get("axis", l.axis);
    r.get("c", l.c);
    r.get("w", l.w);
    require(l.axis >= 0 && l.axis < dim, "shape.axis", "must index a grid axis");
    require(l.c >= 0 && l.c < 1, "shape.c", "must lie in [0, 1)");
    require(l.w > 0 && l.w < 0.5, "shape.w", "must lie in (0, 1/2)");
    s = l;
  } else if (type == "ball") {
    Ball b;
    r.get("center", b.center);
    r.get("r", b.r);
    for (int a = 0; a < 3; ++a) require(b.center[a] >= 0 && b.center[a] < 1, "shape.center", "entries must lie in [0, 1)");
    require(b.r > 0 && b.r < 0.5, "shape.r", "must lie in (0, 1/2)");
    s = b;
  } else if (type == "cylinder") {
    Cylinder c;
    r.get("axis", c.axis);
    r.get("center", c.center);
    r.get("r", c.r);
    require(dim == 3, "shape.type", "cylinder requires a 3D grid");
    require(c.axis >= 0 && c.axis < 3, "shape.axis", "must index a grid axis");
    for (int a = 0; a < 2; ++a) require(c.center[a] >= 0 && c.center[a] < 1, "shape.center", "entries must lie in [0, 1)");
    require(c.r > 0 && c.r < 0.5, "shape.r", "must lie in (0, 1/2)");
    s = c;
  } else {
    throw ConfigError("shape.type: must be lamella, ball or cylinder");
  }
  r.finish();
  return s;
}

inline json shape_json(const ShapeCandidate& s) {
  if (const auto* l = std::get_if<Lamella>(&s)) return {{"type", "lamella"}, {"axis", l->axis}, {"c", l->c}, {"w", l->w}};
  if (const auto* b = std::get_if<Ball>(&s)) return {{"type", "ball"}, {"center", b->center}, {"r", b->r}};
  const auto& c = std::get<Cylinder>(s);
  return {{"type", "cylinder"}, {"axis", c.axis}, {"center", c.center}, {"r", c.r}};
}

}  // namespace detail

// Every constraint that does not depend on the subcommand.
inline void validate(const RunConfig& c) {
  using detail::require;
  require(c.threads >= 1, "threads", "must be >= 1");
  require(c.grid.size() >= 1 && c.grid.size() <= 3, "grid", "must have 1 to 3 entries");
  for (std::size_t a = 0; a < c.grid.size(); ++a)
    require(c.grid[a] >= 4 && c.grid[a] % 2 == 0, "grid[" + std::to_string(a) + "]", "must be even and >= 4");
  try {
    validate_shape(c.shape, static_cast<int>(c.grid.size()));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("shape: ") + e.what());
  }
  require(c.gamma >= 0, "gamma", "must be >= 0");
  require(c.eps > 0, "eps", "must be > 0");
  require(c.flow.dt > 0, "flow.dt", "must be > 0");
  require(c.flow.max_steps >= 0, "flow.max_steps", "must be >= 0");
  require(c.flow.energy_tolerance >= 0, "flow.energy_tolerance", "must be >= 0");
  require(c.flow.dt_backoff > 0 && c.flow.dt_backoff < 1, "flow.dt_backoff", "must lie in (0, 1)");
  require(c.flow.min_dt > 0, "flow.min_dt", "must be > 0");
  require(c.flow.perturbation >= 0 && c.flow.perturbation < 1, "flow.perturbation", "must lie in [0, 1)");
  const auto& k = c.construct;
  require(k.gamma_bar > 0, "construct.gamma_bar", "must be > 0");
  require(!k.k.empty(), "construct.k", "must not be empty");
  for (std::size_t i = 0; i < k.k.size(); ++i) {
    const std::string key = "construct.k[" + std::to_string(i) + "]";
    require(k.k[i] >= 1, key, "must be >= 1");
    for (auto n : c.grid) require(n % static_cast<std::size_t>(k.k[i]) == 0, key, "must divide every grid size");
  }
  require(k.continuation_steps >= 1, "construct.continuation_steps", "must be >= 1");
  require(k.kick >= 0, "construct.kick", "must be >= 0");
  require(k.escape_alpha > 0, "construct.escape_alpha", "must be > 0");
  require(k.mesh_resolution >= 8 && k.mesh_resolution % 2 == 0, "construct.mesh_resolution", "must be even and >= 8");
  require(k.stability_resolution >= 16 && k.stability_resolution % 2 == 0, "construct.stability_resolution",
          "must be even and >= 16");
  require(k.probes >= 0, "construct.probes", "must be >= 0");
  require(k.probe_amplitude >= 0 && k.probe_amplitude <= 3, "construct.probe_amplitude", "must lie in [0, 3]");
  require(k.probe_k >= 1, "construct.probe_k", "must be >= 1");
  for (auto n : c.grid) require(n % static_cast<std::size_t>(k.probe_k) == 0, "construct.probe_k", "must divide every grid size");
  const auto& s = c.stability;
  require(s.mesh_resolution >= 16 && s.mesh_resolution % 2 == 0, "stability.mesh_resolution", "must be even and >= 16");
  require(s.qmax >= 1, "stability.qmax", "must be >= 1");
  require(s.gamma_max > 0, "stability.gamma_max", "must be > 0");
  for (std::size_t i = 0; i < s.gammas.size(); ++i)
    require(s.gammas[i] >= 0, "stability.gammas[" + std::to_string(i) + "]", "must be >= 0");
  require(!c.scaling_k.empty(), "scaling.k", "must not be empty");
  for (std::size_t i = 0; i < c.scaling_k.size(); ++i) {
    const std::string key = "scaling.k[" + std::to_string(i) + "]";
    require(c.scaling_k[i] >= 1, key, "must be >= 1");
    for (auto n : c.grid) require(n % static_cast<std::size_t>(c.scaling_k[i]) == 0, key, "must divide every grid size");
  }
  require(c.gamma_limit_eps.size() >= 2, "gamma_limit.eps", "needs at least two values");
  for (std::size_t i = 0; i < c.gamma_limit_eps.size(); ++i)
    require(c.gamma_limit_eps[i] > 0, "gamma_limit.eps[" + std::to_string(i) + "]", "must be > 0");
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["threads"] = c.threads;
  j["grid"] = c.grid;
  j["shape"] = detail::shape_json(c.shape);
  j["gamma"] = c.gamma;
  j["eps"] = c.eps;
  j["flow"] = {{"dt", c.flow.dt},
               {"max_steps", c.flow.max_steps},
               {"energy_tolerance", c.flow.energy_tolerance},
               {"stabilizer", c.flow.stabilizer},
               {"dt_backoff", c.flow.dt_backoff},
               {"min_dt", c.flow.min_dt},
               {"perturbation", c.flow.perturbation}};
  const auto& k = c.construct;
  j["construct"] = {{"gamma_bar", k.gamma_bar},
                    {"k", k.k},
                    {"continuation_steps", k.continuation_steps},
                    {"kick", k.kick},
                    {"escape_alpha", k.escape_alpha},
                    {"mesh_resolution", k.mesh_resolution},
                    {"stability_resolution", k.stability_resolution},
                    {"probes", k.probes},
                    {"probe_amplitude", k.probe_amplitude},
                    {"probe_k", k.probe_k},
                    {"probe_seed", k.probe_seed}};
  j["stability"] = {{"mesh_resolution", c.stability.mesh_resolution},
                    {"qmax", c.stability.qmax},
                    {"gamma_max", c.stability.gamma_max},
                    {"gammas", c.stability.gammas}};
  j["scaling"] = {{"k", c.scaling_k}};
  j["gamma_limit"] = {{"eps", c.gamma_limit_eps}};
  return j;
}

// Missing keys keep their defaults; unknown keys are errors.
inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::ObjectReader r(j, "");
  r.get("threads", c.threads);
  r.get("grid", c.grid);
  if (r.has("shape")) c.shape = detail::parse_shape(r.sub("shape"), static_cast<int>(c.grid.size()));
  r.get("gamma", c.gamma);
  r.get("eps", c.eps);
  if (r.has("flow")) {
    detail::ObjectReader f(r.sub("flow"), "flow");
    f.get("dt", c.flow.dt);
    f.get("max_steps", c.flow.max_steps);
    f.get("energy_tolerance", c.flow.energy_tolerance);
    f.get("stabilizer", c.flow.stabilizer);
    f.get("dt_backoff", c.flow.dt_backoff);
    f.get("min_dt", c.flow.min_dt);
    f.get("perturbation", c.flow.perturbation);
    f.finish();
  }
  if (r.has("construct")) {
    detail::ObjectReader f(r.sub("construct"), "construct");
    auto& k = c.construct;
    f.get("gamma_bar", k.gamma_bar);
    f.get("k", k.k);
    f.get("continuation_steps", k.continuation_steps);
    f.get("kick", k.kick);
    f.get("escape_alpha", k.escape_alpha);
    f.get("mesh_resolution", k.mesh_resolution);
    f.get("stability_resolution", k.stability_resolution);
    f.get("probes", k.probes);
    f.get("probe_amplitude", k.probe_amplitude);
    f.get("probe_k", k.probe_k);
    f.get("probe_seed", k.probe_seed);
    f.finish();
  }
  if (r.has("stability")) {
    detail::ObjectReader f(r.sub("stability"), "stability");
    f.get("mesh_resolution", c.stability.mesh_resolution);
    f.get("qmax", c.stability.qmax);
    f.get("gamma_max", c.stability.gamma_max);
    f.get("gammas", c.stability.gammas);
    f.finish();
  }
  if (r.has("scaling")) {
    detail::ObjectReader f(r.sub("scaling"), "scaling");
    f.get("k", c.scaling_k);
    f.finish();
  }
  if (r.has("gamma_limit")) {
    detail::ObjectReader f(r.sub("gamma_limit"), "gamma_limit");
    f.get("eps", c.gamma_limit_eps);
    f.finish();
  }
  r.finish();
  validate(c);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2); }

}  // namespace okpattern
