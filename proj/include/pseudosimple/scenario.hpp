#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "group.hpp"
#include "isotropy.hpp"
#include "maps.hpp"
#include "planar_d3.hpp"
#include "quadrature.hpp"

namespace ps::cli {

using json = nlohmann::ordered_json;

enum class Task { Group, Analyze, Planar, Simulate, Sweep, ReturnMap, Census, Verify };

inline const std::vector<std::pair<std::string, Task>>& task_names() {
  static const std::vector<std::pair<std::string, Task>> names{
      {"group", Task::Group},       {"analyze", Task::Analyze},     {"planar", Task::Planar},
      {"simulate", Task::Simulate}, {"sweep", Task::Sweep},         {"returnmap", Task::ReturnMap},
      {"census", Task::Census},     {"verify", Task::Verify}};
  return names;
}

inline Task parse_task(const std::string& s) {
  for (const auto& [n, t] : task_names())
    if (n == s) return t;
  throw ConfigError("unknown task '" + s + "'");
}

inline std::string task_name(Task t) {
  for (const auto& [n, v] : task_names())
    if (v == t) return n;
  return "?";
}

// ---------------------------------------------------------------------------
// Strict JSON access

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": not finite");
  return v;
}

inline double number_or(const json& j, const std::string& key, const std::string& where, double def) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : def;
}

inline long long integer_or(const json& j, const std::string& key, const std::string& where, long long def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline bool bool_or(const json& j, const std::string& key, const std::string& where, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return j.at(key).get<bool>();
}

inline std::string string_or(const json& j, const std::string& key, const std::string& where, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vec4 vec4(const json& j, const std::string& where) {
  const auto v = numbers(j, where);
  if (v.size() != 4) throw ConfigError(where + ": expected 4 components");
  return {v[0], v[1], v[2], v[3]};
}

/// %.17g, with negative zero printed as 0.
inline std::string fmt(double v, int digits = 17) {
  if (v == 0.0) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Value rounded to `digits` significant digits.
inline double round_sig(double v, int digits) {
  const double r = std::strtod(fmt(v, digits).c_str(), nullptr);
  return r == 0.0 ? 0.0 : r;
}

inline json vec_json(const Vec4& v, int dim = 4) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(v[i] == 0.0 ? 0.0 : v[i]);
  return a;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration

struct ScenarioConfig {
  Task task = Task::Verify;
  std::string description;
  std::optional<std::string> family;
  json coefficients = json::object();
  IntegratorConfig integrator;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output;
  json block = json::object();  // task-specific block
};

inline IntegratorConfig parse_integrator(const json& j, IntegratorConfig cfg = {}) {
  const std::string w = "integrator";
  detail::check_keys(j, w, {"rtol", "atol", "max_step", "max_time", "initial_step"});
  cfg.rtol = detail::number_or(j, "rtol", w, cfg.rtol);
  cfg.atol = detail::number_or(j, "atol", w, cfg.atol);
  cfg.max_step = detail::number_or(j, "max_step", w, cfg.max_step);
  cfg.max_time = detail::number_or(j, "max_time", w, cfg.max_time);
  cfg.initial_step = detail::number_or(j, "initial_step", w, cfg.initial_step);
  if (!(cfg.rtol > 0 && cfg.atol > 0)) throw ConfigError("integrator: tolerances must be positive");
  if (!(cfg.max_time > 0)) throw ConfigError("integrator: max_time must be positive");
  if (cfg.max_step < 0 || !(cfg.initial_step > 0)) throw ConfigError("integrator: invalid step sizes");
  return cfg;
}

/// Parses a scenario document. `task_override` replaces the task field (the
/// CLI subcommand wins over the file).
inline ScenarioConfig parse_config(const json& j, std::optional<Task> task_override = std::nullopt) {
  static const std::set<std::string> blocks{"group", "analyze", "planar", "simulate", "sweep", "returnmap", "census", "verify"};
  std::set<std::string> allowed{"task", "description", "family", "coefficients", "integrator", "seed", "threads", "output"};
  allowed.insert(blocks.begin(), blocks.end());
  detail::check_keys(j, "config", allowed);
  ScenarioConfig c;
  if (task_override) {
    c.task = *task_override;
  } else {
    if (!j.contains("task")) throw ConfigError("config: missing key 'task'");
    c.task = parse_task(detail::string_or(j, "task", "config", ""));
  }
  c.description = detail::string_or(j, "description", "config", "");
  if (j.contains("family")) c.family = detail::string_or(j, "family", "config", "");
  if (j.contains("coefficients")) {
    c.coefficients = j.at("coefficients");
    if (!c.coefficients.is_object()) throw ConfigError("coefficients: expected an object");
  }
  c.integrator.max_time = 1000.0;
  if (j.contains("integrator")) c.integrator = parse_integrator(j.at("integrator"), c.integrator);
  const long long seed = detail::integer_or(j, "seed", "config", 1);
  if (seed < 0) throw ConfigError("config.seed: must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.threads = static_cast<int>(detail::integer_or(j, "threads", "config", 1));
  if (c.threads < 1) throw ConfigError("config.threads: must be at least 1");
  c.output = detail::string_or(j, "output", "config", "");
  for (const auto& b : blocks) {
    if (!j.contains(b)) continue;
    if (b != task_name(c.task)) throw ConfigError("config: block '" + b + "' does not match task '" + task_name(c.task) + "'");
    c.block = j.at(b);
    if (!c.block.is_object()) throw ConfigError(b + ": expected an object");
  }
  return c;
}

inline json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config file '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + p.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Vector fields from configuration

/// Builds the field from the family tag and coefficient block, starting from
/// a preset and applying any per-symbol overrides.
inline VectorFieldSpec spec_from(const std::string& family, const json& coeffs,
                                 const std::map<std::string, double>& overrides = {}) {
  const std::string w = "coefficients";
  json k = coeffs;
  for (const auto& [name, v] : overrides) k[name] = v;
  auto get = [&](const std::string& key) -> std::optional<double> {
    if (!k.contains(key)) return std::nullopt;
    return detail::number(k.at(key), w + "." + key);
  };
  if (family == "d3" || family == "d3_tilde") {
    const bool tilde = family == "d3_tilde";
    std::set<std::string> allowed{"preset"};
    for (int i = 1; i <= 10; ++i) allowed.insert("a" + std::to_string(i));
    for (int i = 1; i <= 6; ++i) allowed.insert("b" + std::to_string(i));
    detail::check_keys(k, w, allowed);
    const std::string preset = detail::string_or(k, "preset", w, "");
    std::array<double, 10> a{};
    std::array<double, 6> b{};
    bool have_base = false;
    if (!preset.empty()) {
      CoeffsD3 base;
      if (preset == "reference") base = CoeffsD3::reference_periodic();
      else if (preset == "reference_tilde") base = CoeffsD3::reference_tilde();
      else throw ConfigError(w + ".preset: unknown preset '" + preset + "' (reference, reference_tilde)");
      a = base.a;
      b = base.b;
      have_base = true;
    }
    for (int i = 0; i < 10; ++i) {
      const auto v = get("a" + std::to_string(i + 1));
      if (v) a[static_cast<std::size_t>(i)] = *v;
      else if (!have_base) throw ConfigError(w + ": missing a" + std::to_string(i + 1) + " (or give a preset)");
    }
    for (int i = 0; i < 6; ++i) {
      const auto v = get("b" + std::to_string(i + 1));
      if (v) b[static_cast<std::size_t>(i)] = *v;
      else if (!have_base) throw ConfigError(w + ": missing b" + std::to_string(i + 1) + " (or give a preset)");
    }
    return VectorFieldSpec::d3(CoeffsD3::make(a, b, tilde));
  }
  if (family == "gl23") {
    detail::check_keys(k, w, {"h1", "h2", "mu", "b", "c", "d", "e"});
    const bool param = k.contains("h1") || k.contains("h2");
    const bool raw = k.contains("mu") || k.contains("b") || k.contains("c") || k.contains("d") || k.contains("e");
    if (param && raw) throw ConfigError(w + ": give either h1, h2 or mu, b, c, d, e");
    if (raw) {
      CoeffsGL c;
      for (const char* key : {"mu", "b", "c", "d", "e"})
        if (!k.contains(key)) throw ConfigError(w + ": missing " + key);
      c.mu = *get("mu");
      c.b = *get("b");
      c.c = *get("c");
      c.d = *get("d");
      c.e = *get("e");
      return VectorFieldSpec::gl23(c);
    }
    if (!k.contains("h1") || !k.contains("h2")) throw ConfigError(w + ": missing h1 or h2");
    return VectorFieldSpec::gl23(GLParametrization{*get("h1"), *get("h2")});
  }
  if (family == "planar") {
    detail::check_keys(k, w, {"alpha_planar", "beta_planar"});
    if (!k.contains("alpha_planar") || !k.contains("beta_planar")) throw ConfigError(w + ": missing alpha_planar or beta_planar");
    return VectorFieldSpec::planar(PlanarParams::make(*get("alpha_planar"), *get("beta_planar")));
  }
  throw ConfigError("family: unknown family '" + family + "' (d3, d3_tilde, gl23, planar)");
}

inline VectorFieldSpec spec_from(const ScenarioConfig& c) {
  if (!c.family) throw ConfigError("config: task '" + task_name(c.task) + "' requires 'family'");
  return spec_from(*c.family, c.coefficients);
}

/// Existence predicates that fail, formatted for diagnostics.
inline std::string failed_conditions(const VectorFieldSpec& spec) {
  std::string s;
  for (const auto& p : existence_report(spec)) {
    if (p.holds) continue;
    if (!s.empty()) s += "; ";
    s += "(" + p.name + ") violated: " + detail::fmt(p.lhs, 6) + (p.relation == "<" ? " >= " : " <= ") + detail::fmt(p.rhs, 6);
  }
  return s;
}

/// compute_connections with failed existence conditions appended to errors.
inline CycleGeometry connections_or_explain(const VectorFieldSpec& spec) {
  try {
    return compute_connections(spec);
  } catch (const NoConnection& e) {
    const std::string why = failed_conditions(spec);
    throw NoConnection(std::string(e.what()) + (why.empty() ? "" : "; " + why));
  } catch (const NoEquilibrium& e) {
    const std::string why = failed_conditions(spec);
    throw NoEquilibrium(std::string(e.what()) + (why.empty() ? "" : "; " + why));
  }
}

// ---------------------------------------------------------------------------
// Output helpers

class Output {
 public:
  Output(std::filesystem::path dir, bool verbose) : dir_(std::move(dir)), verbose_(verbose) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    written_.push_back(name);
    return f;
  }

  void write_json(const std::string& name, const json& j) {
    auto f = open(name);
    f << j.dump(2) << '\n';
  }

  void log(const std::string& msg) const {
    if (verbose_) std::cerr << "[pseudosimple] " << msg << '\n';
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  bool verbose_;
  std::vector<std::string> written_;
};

/// Trajectory CSV, 17 significant digits.
inline void write_trajectory(std::ostream& os, const TrajectoryRecord& rec) {
  os << (rec.dim == 2 ? "t,x1,y1\n" : "t,x1,y1,x2,y2\n");
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    os << detail::fmt(rec.t[i]);
    for (int k = 0; k < rec.dim; ++k) os << ',' << detail::fmt(rec.x[i][k]);
    os << '\n';
  }
}

/// Columns t,p1,p2 with p_i = <x, v_i> / |v_i|.
inline void emit_projection(std::ostream& os, const TrajectoryRecord& rec, const Vec4& v1, const Vec4& v2) {
  const double n1 = v1.norm(), n2 = v2.norm();
  if (!(n1 > 0 && n2 > 0)) throw DomainError("emit_projection: projection vectors must be non-zero");
  const double c = v1.dot(v2) / (n1 * n2);
  if (1.0 - std::abs(c) < 1e-12) throw DomainError("emit_projection: projection vectors are linearly dependent");
  os << "t,p1,p2\n";
  for (std::size_t i = 0; i < rec.t.size(); ++i)
    os << detail::fmt(rec.t[i]) << ',' << detail::fmt(rec.x[i].dot(v1) / n1) << ',' << detail::fmt(rec.x[i].dot(v2) / n2) << '\n';
}

inline void write_connections(std::ostream& os, const CycleGeometry& geo) {
  os << "connection,type,from,to,x1,y1,x2,y2\n";
  for (std::size_t c = 0; c < geo.connections.size(); ++c) {
    const Polyline& p = geo.connections[c];
    for (const Vec4& x : p.points) {
      os << c << ',' << p.type << ',' << p.from << ',' << p.to;
      for (int k = 0; k < 4; ++k) os << ',' << detail::fmt(x[k]);
      os << '\n';
    }
  }
}

inline json verdict_json(const ClassificationVerdict& v, std::uint64_t seed) {
  json j;
  j["kind"] = verdict_name(v.kind);
  j["period"] = v.kind == VerdictKind::PeriodicOrbit ? json(v.period) : json(nullptr);
  j["min_dist"] = v.min_dist;
  j["max_dist"] = v.max_dist;
  j["dwell_times"] = v.dwell_times;
  j["seed"] = seed;
  j["note"] = v.note;
  j["crossings_per_period"] = v.crossings_per_period;
  j["period_sections"] = v.period_sections;
  j["section_dispersion"] = v.section_dispersion;
  j["final_window_max_dist"] = v.final_window_max_dist;
  j["closest_xi1_copy"] = v.closest_equilibrium[0];
  j["closest_xi2_copy"] = v.closest_equilibrium[1];
  j["visits"] = v.visits.size();
  j["crossings"] = v.crossings.size();
  j["escape_time"] = v.kind == VerdictKind::EscapesNeighborhood ? json(v.escape_time) : json(nullptr);
  j["end_time"] = v.end_time;
  return j;
}

// ---------------------------------------------------------------------------
// Shared block parsers

inline ClassifyConfig parse_classify(const json& j, const IntegratorConfig& ic) {
  const std::string w = "classify";
  ClassifyConfig cc;
  cc.integrator = ic;
  if (j.is_null()) return cc;
  detail::check_keys(j, w,
                     {"delta_escape", "transient", "visit_radius", "period_tol", "period_time_rtol", "dwell_growth",
                      "period_confirmations", "max_lag", "converge_distance", "min_monotone_visits"});
  cc.delta_escape = detail::number_or(j, "delta_escape", w, cc.delta_escape);
  cc.transient = detail::number_or(j, "transient", w, cc.transient);
  cc.visit_radius = detail::number_or(j, "visit_radius", w, cc.visit_radius);
  cc.period_tol = detail::number_or(j, "period_tol", w, cc.period_tol);
  cc.period_time_rtol = detail::number_or(j, "period_time_rtol", w, cc.period_time_rtol);
  cc.dwell_growth = detail::number_or(j, "dwell_growth", w, cc.dwell_growth);
  cc.period_confirmations = static_cast<int>(detail::integer_or(j, "period_confirmations", w, cc.period_confirmations));
  cc.max_lag = static_cast<int>(detail::integer_or(j, "max_lag", w, cc.max_lag));
  cc.converge_distance = detail::number_or(j, "converge_distance", w, cc.converge_distance);
  cc.min_monotone_visits = static_cast<int>(detail::integer_or(j, "min_monotone_visits", w, cc.min_monotone_visits));
  if (!(cc.transient >= 0 && cc.transient < 1)) throw ConfigError(w + ".transient: must lie in [0, 1)");
  if (!(cc.delta_escape > 0 && cc.visit_radius > 0 && cc.period_tol > 0)) throw ConfigError(w + ": radii and tolerances must be positive");
  if (cc.period_confirmations < 1 || cc.max_lag < 1 || cc.min_monotone_visits < 1) throw ConfigError(w + ": counts must be positive");
  return cc;
}

/// Initial state: an equilibrium, a section point or an explicit point, plus
/// an optional offset.
struct StartSpec {
  std::string from = "xi2";
  int index = 0;
  Vec4 point = Vec4::Zero();
  Vec4 offset = Vec4::Zero();
};

inline StartSpec parse_start(const json& j) {
  const std::string w = "start";
  StartSpec s;
  if (j.is_null()) return s;
  detail::check_keys(j, w, {"from", "index", "point", "offset"});
  s.from = detail::string_or(j, "from", w, s.from);
  if (s.from != "xi1" && s.from != "xi2" && s.from != "section" && s.from != "point")
    throw ConfigError(w + ".from: expected xi1, xi2, section or point");
  s.index = static_cast<int>(detail::integer_or(j, "index", w, 0));
  if (j.contains("point")) s.point = detail::vec4(j.at("point"), w + ".point");
  else if (s.from == "point") throw ConfigError(w + ": 'point' required when from = point");
  if (j.contains("offset")) s.offset = detail::vec4(j.at("offset"), w + ".offset");
  return s;
}

inline Vec4 resolve_start(const StartSpec& s, const CycleGeometry& geo) {
  if (s.from == "point") return s.point + s.offset;
  if (s.from == "section") {
    if (s.index < 0 || static_cast<std::size_t>(s.index) >= geo.sections.size())
      throw ConfigError("start.index: section " + std::to_string(s.index) + " does not exist (" + std::to_string(geo.sections.size()) + " sections)");
    return geo.sections[static_cast<std::size_t>(s.index)].point + s.offset;
  }
  return geo.base[s.from == "xi1" ? 0 : 1].position + s.offset;
}

// ---------------------------------------------------------------------------
// Tasks

inline json group_json(const GroupTable& g) {
  json j;
  j["name"] = g.name();
  j["order"] = g.order();
  j["all_special"] = g.all_special();
  json els = json::array();
  for (std::size_t i = 0; i < g.order(); ++i) {
    const Orthogonal4& el = g[i];
    json e;
    e["index"] = i;
    e["element_order"] = g.element_order(static_cast<int>(i));
    e["determinant"] = detail::round_sig(el.determinant(), 12);
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(detail::round_sig(el.matrix()(r, c), 12));
      m.push_back(row);
    }
    e["matrix"] = m;
    const int fd = fixed_subspace(el).dim();
    e["fixed_dim"] = fd;
    if (el.determinant() > 0) {
      const Rotation4 rot = decompose_rotation(el.matrix());
      const auto pred = dim_fix_two_predicate(rot);
      e["fix_dim_two_predicate"] = pred ? json(*pred) : json(nullptr);
      e["plane_reflection"] = is_plane_reflection(rot);
    }
    els.push_back(e);
  }
  j["elements"] = els;
  return j;
}

inline json subspace_json(const LinearSubspace& s) {
  json b = json::array();
  for (int i = 0; i < s.dim(); ++i) {
    json v = json::array();
    for (int k = 0; k < 4; ++k) v.push_back(detail::round_sig(s[i][k], 12));
    b.push_back(v);
  }
  return b;
}

inline int run_group(const ScenarioConfig& c, Output& out) {
  const std::string w = "group";
  detail::check_keys(c.block, w, {"group"});
  std::string which = detail::string_or(c.block, "group", w, c.family.value_or("gl23"));
  GroupTable g;
  if (which == "d3") g = groups::gamma_d3();
  else if (which == "d3_tilde") g = groups::gamma_tilde();
  else if (which == "gl23") g = groups::gl23();
  else if (which == "planar") g = groups::planar_d3();
  else throw ConfigError(w + ".group: unknown group '" + which + "' (d3, d3_tilde, gl23, planar)");
  out.log("group " + g.name() + " of order " + std::to_string(g.order()));
  json j = group_json(g);
  if (g.order() == 48) {
    json inv = json::array();
    for (const auto& e : enumerate_isotropy_gl23(g)) {
      json r;
      r["label"] = e.label;
      r["dim"] = e.space.dim();
      r["basis"] = subspace_json(e.space);
      inv.push_back(r);
    }
    j["subspaces"] = inv;
  }
  out.write_json("group.json", j);
  return 0;
}

inline json equilibrium_json(const EquilibriumReport& r) {
  json j;
  j["label"] = r.label;
  j["position"] = detail::vec_json(r.position);
  j["radial_eigenvalue"] = r.radial;
  json ev = json::array();
  for (const auto& e : r.eigen) {
    json x;
    x["re"] = e.value.real();
    x["im"] = e.value.imag();
    x["multiplicity"] = e.multiplicity;
    x["role"] = role_name(e.role);
    ev.push_back(x);
  }
  j["eigenvalues"] = ev;
  return j;
}

inline int run_analyze(const ScenarioConfig& c, Output& out) {
  const std::string w = "analyze";
  detail::check_keys(c.block, w, {"connections", "equivariance_samples"});
  const VectorFieldSpec spec = spec_from(c);
  const bool want_conn = detail::bool_or(c.block, "connections", w, spec.dim() == 4);
  const int samples = static_cast<int>(detail::integer_or(c.block, "equivariance_samples", w, 100));
  json j;
  j["family"] = family_name(spec.family());
  j["group_order"] = spec.group().order();
  j["equivariance_residual"] = verify_equivariance(spec, samples, c.seed);
  json preds = json::array();
  for (const auto& p : existence_report(spec)) {
    json x;
    x["condition"] = p.name;
    x["lhs"] = detail::finite_or_null(p.lhs);
    x["relation"] = p.relation;
    x["rhs"] = detail::finite_or_null(p.rhs);
    x["holds"] = p.holds;
    preds.push_back(x);
  }
  j["existence"] = preds;
  if (spec.dim() == 4) {
    std::vector<EquilibriumReport> eq;
    try {
      eq = equilibria_on_axes(spec);
    } catch (const NoEquilibrium& e) {
      const std::string why = failed_conditions(spec);
      throw NoEquilibrium(std::string(e.what()) + (why.empty() ? "" : "; " + why));
    }
    json eqs = json::array();
    for (const auto& r : eq) eqs.push_back(equilibrium_json(r));
    j["equilibria"] = eqs;
    json an = json::object();
    for (int which : {1, 2}) {
      json a = json::array();
      for (const auto& e : analytic_eigenvalues(spec, which)) {
        json x;
        x["name"] = e.name;
        x["value"] = e.value;
        x["multiplicity"] = e.multiplicity;
        a.push_back(x);
      }
      an[which == 1 ? "xi1" : "xi2"] = a;
    }
    j["analytic_eigenvalues"] = an;
    const CycleRates r = cycle_rates(eq);
    j["rates"] = {{"c1", r.c1}, {"e1", r.e1}, {"c2", r.c2}, {"e2", r.e2}};
    j["exponent_3c1_over_e1"] = 3.0 * r.c1 / r.e1;
    j["h"] = r.c1 * r.c2 / (r.e1 * r.e2);
    if (want_conn) {
      out.log("computing connections");
      const CycleGeometry geo = connections_or_explain(spec);
      j["connections"] = {{"equilibria", geo.equilibria.size()},
                          {"kappa1", geo.count(1)},
                          {"kappa2", geo.count(2)},
                          {"sections", geo.sections.size()}};
      auto f = out.open("connections.csv");
      write_connections(f, geo);
    }
  }
  out.write_json("summary.json", j);
  return 0;
}

inline int run_planar(const ScenarioConfig& c, Output& out) {
  const std::string w = "planar";
  detail::check_keys(c.block, w, {"s_points", "r0", "theta0", "rtol"});
  const VectorFieldSpec spec = spec_from(c);
  if (spec.family() != Family::PlanarD3) throw ConfigError("planar: family must be 'planar'");
  const PlanarParams p = spec.planar_params();
  const long long n = detail::integer_or(c.block, "s_points", w, 61);
  if (n < 2) throw ConfigError(w + ".s_points: at least 2");
  {
    auto f = out.open("s_table.csv");
    f << "theta,S\n";
    for (long long i = 0; i < n; ++i) {
      const double th = std::numbers::pi / 3 * static_cast<double>(i) / static_cast<double>(n - 1);
      f << detail::fmt(th) << ',' << detail::fmt(s_integral(th)) << '\n';
    }
  }
  const std::vector<double> r0s = c.block.contains("r0") ? detail::numbers(c.block.at("r0"), w + ".r0") : std::vector<double>{0.01, 0.1, 0.5};
  const std::vector<double> th0s = c.block.contains("theta0") ? detail::numbers(c.block.at("theta0"), w + ".theta0")
                                                             : std::vector<double>{0.0, 0.1, 0.5, 1.0};
  TransitOptions opt;
  opt.rtol = detail::number_or(c.block, "rtol", w, opt.rtol);
  auto f = out.open("transits.csv");
  f << "r0,theta0,tau,exit_theta,conserved_drift,exponential_drift,theta_monotone,tau_closed_form\n";
  for (double r0 : r0s)
    for (double th0 : th0s) {
      const TransitResult tr = transit(p, r0, th0, opt);
      f << detail::fmt(r0) << ',' << detail::fmt(th0) << ',' << detail::fmt(tr.tau) << ',' << detail::fmt(tr.exit_theta) << ','
        << detail::fmt(tr.conserved_drift) << ',' << detail::fmt(tr.exponential_drift) << ',' << (tr.theta_monotone ? 1 : 0) << ',';
      if (th0 == 0.0) f << detail::fmt(transit_time_axis(p, r0));
      f << '\n';
    }
  return 0;
}

inline std::pair<Vec4, Vec4> parse_projection(const json& j) {
  detail::check_keys(j, "projection", {"v1", "v2"});
  if (!j.contains("v1") || !j.contains("v2")) throw ConfigError("projection: v1 and v2 required");
  return {detail::vec4(j.at("v1"), "projection.v1"), detail::vec4(j.at("v2"), "projection.v2")};
}

inline int run_simulate(const ScenarioConfig& c, Output& out) {
  const std::string w = "simulate";
  detail::check_keys(c.block, w, {"start", "x0", "sample_dt", "projection", "classify", "write_connections"});
  const VectorFieldSpec spec = spec_from(c);
  IntegrateOptions io;
  io.sample_dt = detail::number_or(c.block, "sample_dt", w, 0.0);
  if (io.sample_dt < 0) throw ConfigError(w + ".sample_dt: must be non-negative");
  std::optional<std::pair<Vec4, Vec4>> proj;
  if (c.block.contains("projection")) proj = parse_projection(c.block.at("projection"));

  if (spec.dim() == 2) {
    if (!c.block.contains("x0")) throw ConfigError(w + ": planar simulation requires x0");
    const auto v = detail::numbers(c.block.at("x0"), w + ".x0");
    if (v.size() != 2) throw ConfigError(w + ".x0: expected 2 components");
    const TrajectoryRecord rec = integrate(spec, Eigen::Vector2d(v[0], v[1]), c.integrator, io);
    auto f = out.open("trajectory.csv");
    write_trajectory(f, rec);
    return 0;
  }

  out.log("computing connections");
  const CycleGeometry geo = connections_or_explain(spec);
  Vec4 x0;
  if (c.block.contains("x0")) {
    if (c.block.contains("start")) throw ConfigError(w + ": give either x0 or start");
    x0 = detail::vec4(c.block.at("x0"), w + ".x0");
  } else {
    x0 = resolve_start(parse_start(c.block.contains("start") ? c.block.at("start") : json(nullptr)), geo);
  }
  out.log("integrating to t = " + detail::fmt(c.integrator.max_time, 6));
  const TrajectoryRecord rec = integrate(spec, x0, c.integrator, io);
  {
    auto f = out.open("trajectory.csv");
    write_trajectory(f, rec);
  }
  if (proj) {
    auto f = out.open("projection.csv");
    emit_projection(f, rec, proj->first, proj->second);
  }
  if (detail::bool_or(c.block, "write_connections", w, true)) {
    auto f = out.open("connections.csv");
    write_connections(f, geo);
  }
  out.log("classifying");
  const ClassifyConfig cc = parse_classify(c.block.contains("classify") ? c.block.at("classify") : json(nullptr), c.integrator);
  const ClassificationVerdict v = classify_attractor(spec, x0, geo, cc);
  json j = verdict_json(v, c.seed);
  j["x0"] = detail::vec_json(x0);
  out.write_json("verdict.json", j);
  out.log(std::string("verdict ") + verdict_name(v.kind));
  return 0;
}

inline int run_sweep(const ScenarioConfig& c, Output& out) {
  const std::string w = "sweep";
  detail::check_keys(c.block, w, {"parameters", "start", "classify"});
  if (!c.family) throw ConfigError("config: task 'sweep' requires 'family'");
  if (*c.family == "planar") throw ConfigError("sweep: the planar family has no cycle to classify");
  // Cartesian product in the order the parameters are listed.
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  if (c.block.contains("parameters")) {
    const json& p = c.block.at("parameters");
    if (!p.is_object()) throw ConfigError(w + ".parameters: expected an object");
    for (const auto& [k, v] : p.items()) {
      names.push_back(k);
      values.push_back(detail::numbers(v, w + ".parameters." + k));
    }
  }
  std::vector<std::map<std::string, double>> grid;
  if (!names.empty()) {
    std::vector<std::size_t> idx(names.size(), 0);
    bool empty = false;
    for (const auto& v : values) empty = empty || v.empty();
    while (!empty) {
      std::map<std::string, double> row;
      for (std::size_t i = 0; i < names.size(); ++i) row[names[i]] = values[i][idx[i]];
      grid.push_back(row);
      std::size_t k = names.size();
      while (k-- > 0) {
        if (++idx[k] < values[k].size()) break;
        idx[k] = 0;
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
  }
  // Validate the coefficient block once, even when the grid is empty.
  spec_from(*c.family, c.coefficients, grid.empty() ? std::map<std::string, double>{} : grid.front());
  const StartSpec start = parse_start(c.block.contains("start") ? c.block.at("start") : json(nullptr));
  const ClassifyConfig cc = parse_classify(c.block.contains("classify") ? c.block.at("classify") : json(nullptr), c.integrator);
  out.log("sweeping " + std::to_string(grid.size()) + " grid points on " + std::to_string(c.threads) + " threads");
  const std::string fam = *c.family;
  const json coeffs = c.coefficients;
  auto make_case = [&](const std::map<std::string, double>& row) {
    const VectorFieldSpec spec = spec_from(fam, coeffs, row);
    const CycleGeometry geo = compute_connections(spec);
    return std::pair<VectorFieldSpec, Vec4>(spec, resolve_start(start, geo));
  };
  const auto rows = sweep(grid, make_case, cc, c.threads);
  auto f = out.open("sweep.csv");
  for (const auto& n : names) f << n << ',';
  f << "kind,period,min_dist,max_dist,section_dispersion,crossings_per_period,visits,error\n";
  for (const auto& r : rows) {
    for (const auto& n : names) f << detail::fmt(r.params.at(n)) << ',';
    if (r.verdict) {
      const auto& v = *r.verdict;
      f << verdict_name(v.kind) << ',' << (v.kind == VerdictKind::PeriodicOrbit ? detail::fmt(v.period) : "") << ','
        << detail::fmt(v.min_dist) << ',' << detail::fmt(v.max_dist) << ',' << detail::fmt(v.section_dispersion) << ','
        << v.crossings_per_period << ',' << v.visits.size() << ",\n";
    } else {
      std::string e = r.error;
      for (char& ch : e)
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      f << "error,,,,,,," << e << '\n';
    }
  }
  return 0;
}

inline CycleData parse_cycle(const json& j, CycleData cd = {}) {
  const std::string w = "returnmap.cycle";
  detail::check_keys(j, w, {"c1", "e1", "c2", "e2", "A", "Theta", "B11", "B12", "B21", "B22", "v01", "v02", "beta", "k"});
  cd.c1 = detail::number_or(j, "c1", w, cd.c1);
  cd.e1 = detail::number_or(j, "e1", w, cd.e1);
  cd.c2 = detail::number_or(j, "c2", w, cd.c2);
  cd.e2 = detail::number_or(j, "e2", w, cd.e2);
  cd.A = detail::number_or(j, "A", w, cd.A);
  cd.Theta = detail::number_or(j, "Theta", w, cd.Theta);
  cd.B11 = detail::number_or(j, "B11", w, cd.B11);
  cd.B12 = detail::number_or(j, "B12", w, cd.B12);
  cd.B21 = detail::number_or(j, "B21", w, cd.B21);
  cd.B22 = detail::number_or(j, "B22", w, cd.B22);
  cd.v01 = detail::number_or(j, "v01", w, cd.v01);
  cd.v02 = detail::number_or(j, "v02", w, cd.v02);
  cd.beta = detail::number_or(j, "beta", w, cd.beta);
  cd.k = static_cast<int>(detail::integer_or(j, "k", w, cd.k));
  return cd;
}

inline json cycle_json(const CycleData& cd) {
  return {{"c1", cd.c1},   {"e1", cd.e1},   {"c2", cd.c2},   {"e2", cd.e2},   {"A", cd.A},
          {"Theta", cd.Theta}, {"B11", cd.B11}, {"B12", cd.B12}, {"B21", cd.B21}, {"B22", cd.B22},
          {"v01", cd.v01}, {"v02", cd.v02}, {"beta", cd.beta}, {"k", cd.k}};
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nan("");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double d = static_cast<double>(n) * sxx - sx * sx;
  return (static_cast<double>(n) * sxy - sx * sy) / d;
}

inline int run_returnmap(const ScenarioConfig& c, Output& out) {
  const std::string w = "returnmap";
  detail::check_keys(c.block, w, {"model", "cycle", "from_field", "start", "iterations", "mu"});
  const std::string model = detail::string_or(c.block, "model", w, "periodic");
  ModelKind kind;
  if (model == "instability") kind = ModelKind::CompleteInstability;
  else if (model == "periodic") kind = ModelKind::PeriodicOrbit;
  else if (model == "contraction") kind = ModelKind::Contraction;
  else throw ConfigError(w + ".model: expected instability, periodic or contraction");
  CycleData cd = parse_cycle(c.block.contains("cycle") ? c.block.at("cycle") : json::object());
  json j;
  if (detail::bool_or(c.block, "from_field", w, false)) {
    const VectorFieldSpec spec = spec_from(c);
    if (spec.dim() != 4) throw ConfigError(w + ".from_field: requires a 4-dimensional family");
    out.log("deriving cycle data from the field");
    const CycleGeometry geo = connections_or_explain(spec);
    cd = cycle_data_from_spec(spec, geo, cd);
  }
  cd.validate();
  j["model"] = model;
  ReturnMapModel m{kind, cd};
  j["base_section"] = m.base_section();
  j["cycle"] = cycle_json(cd);

  PolarPoint start{0.01, 0.01};
  if (c.block.contains("start")) {
    const json& s = c.block.at("start");
    detail::check_keys(s, w + ".start", {"rho", "theta"});
    start.rho = detail::number_or(s, "rho", w + ".start", start.rho);
    start.theta = detail::number_or(s, "theta", w + ".start", start.theta);
  }
  const long long n = detail::integer_or(c.block, "iterations", w, 50);
  if (n < 0) throw ConfigError(w + ".iterations: must be non-negative");

  switch (kind) {
    case ModelKind::CompleteInstability: {
      const Theorem1Result t = theorem1_epsilon(cd);
      j["alpha"] = t.alpha;
      j["epsilon_bound"] = t.epsilon_bound;
      break;
    }
    case ModelKind::PeriodicOrbit: {
      std::vector<double> mus = c.block.contains("mu") ? detail::numbers(c.block.at("mu"), w + ".mu") : std::vector<double>{cd.e2};
      json rows = json::array();
      std::vector<double> xs, ys;
      for (double mu : mus) {
        const Theorem2Result t = theorem2_analysis(cd, mu);
        json r;
        r["mu"] = mu;
        r["regime"] = regime_name(t.regime);
        r["exponent"] = t.exponent;
        r["q"] = t.q;
        r["l"] = t.choice.l;
        r["s"] = t.choice.s;
        r["theta_prime"] = t.choice.theta_prime;
        r["C1"] = t.C1;
        r["C2"] = t.C2;
        r["leading"] = {t.leading.rho, t.leading.theta};
        r["fixed_point"] = {t.fixed_point.rho, t.fixed_point.theta};
        r["residual"] = t.residual;
        r["iterations"] = t.iterations;
        rows.push_back(r);
        if (t.regime == Regime::Periodic && mu > 0 && t.fixed_point.rho > 0) {
          xs.push_back(mu);
          ys.push_back(t.fixed_point.rho);
        }
      }
      j["analysis"] = rows;
      if (xs.size() >= 2) j["fixed_point_loglog_slope"] = loglog_slope(xs, ys);
      break;
    }
    case ModelKind::Contraction: {
      const Theorem3Result t = theorem3_contraction(cd, start.rho, start.theta);
      j["h"] = t.h;
      j["rho_contracts"] = t.rho_contracts;
      j["theta_factor"] = t.theta_factor;
      j["theta_contracts"] = t.theta_contracts;
      break;
    }
  }
  const IterationResult it = iterate_return_map(m, start, static_cast<int>(n));
  j["iterates"] = it.points.size();
  j["exited"] = it.exited;
  j["exit_reason"] = it.exit_reason;
  {
    auto f = out.open("iterates.csv");
    f << "n,rho,theta\n";
    for (std::size_t i = 0; i < it.points.size(); ++i)
      f << i << ',' << detail::fmt(it.points[i].rho) << ',' << detail::fmt(it.points[i].theta) << '\n';
  }
  out.write_json("summary.json", j);
  return 0;
}

inline int run_census(const ScenarioConfig& c, Output& out) {
  const std::string w = "census";
  detail::check_keys(c.block, w, {"delta", "samples", "max_time", "converge_distance", "allow_invariant", "invariant_exclusion"});
  const VectorFieldSpec spec = spec_from(c);
  if (spec.dim() != 4) throw ConfigError("census: requires a 4-dimensional family");
  CensusConfig cc;
  cc.integrator = c.integrator;
  cc.seed = c.seed;
  cc.threads = c.threads;
  cc.delta = detail::number_or(c.block, "delta", w, cc.delta);
  const long long n = detail::integer_or(c.block, "samples", w, static_cast<long long>(cc.samples));
  if (n < 0) throw ConfigError(w + ".samples: must be non-negative");
  cc.samples = static_cast<std::size_t>(n);
  cc.max_time = detail::number_or(c.block, "max_time", w, cc.max_time);
  cc.converge_distance = detail::number_or(c.block, "converge_distance", w, cc.converge_distance);
  cc.allow_invariant = detail::bool_or(c.block, "allow_invariant", w, cc.allow_invariant);
  cc.invariant_exclusion = detail::number_or(c.block, "invariant_exclusion", w, cc.invariant_exclusion);
  if (!(cc.delta > 0 && cc.max_time > 0)) throw ConfigError(w + ": delta and max_time must be positive");
  out.log("computing connections");
  const CycleGeometry geo = connections_or_explain(spec);
  out.log("census of " + std::to_string(cc.samples) + " samples on " + std::to_string(cc.threads) + " threads");
  const CensusResult r = escape_census(spec, geo, cc);
  {
    auto f = out.open("census.csv");
    f << "index,x1,y1,x2,y2,escaped,exit_time,final_distance\n";
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      const auto& s = r.samples[i];
      f << i;
      for (int k = 0; k < 4; ++k) f << ',' << detail::fmt(s.x0[k]);
      f << ',' << (s.escaped ? 1 : 0) << ',' << detail::fmt(s.exit_time) << ',' << detail::fmt(s.final_distance) << '\n';
    }
  }
  json j;
  j["family"] = family_name(spec.family());
  j["delta"] = cc.delta;
  j["samples"] = cc.samples;
  j["seed"] = cc.seed;
  j["max_time"] = cc.max_time;
  j["escape_fraction"] = r.escape_fraction;
  out.write_json("summary.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// Self-test

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;
  double bound = 0.0;
  bool pass = false;
};

inline Check check_le(std::string name, double v, double bound) { return {std::move(name), v, "<=", bound, v <= bound}; }
inline Check check_eq(std::string name, double v, double target) { return {std::move(name), v, "==", target, v == target}; }
inline Check check_ge(std::string name, double v, double bound) { return {std::move(name), v, ">=", bound, v >= bound}; }

/// Largest distance from each closed-form eigenvalue to the nearest numeric
/// one with matching multiplicity.
inline double eigen_mismatch(const VectorFieldSpec& spec, const std::vector<EquilibriumReport>& eq) {
  double worst = 0;
  for (int which : {1, 2}) {
    const auto& rep = eq[static_cast<std::size_t>(which - 1)];
    for (const auto& a : analytic_eigenvalues(spec, which)) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& e : rep.eigen)
        if (e.multiplicity == a.multiplicity) best = std::min(best, std::abs(e.value - cplx(a.value, 0.0)));
      worst = std::max(worst, best);
    }
  }
  return worst;
}

inline std::vector<Check> verify_suite(std::uint64_t seed, const std::function<void(const std::string&)>& log) {
  std::vector<Check> out;
  log("group orders");
  out.push_back(check_eq("order of Gamma (D3)", static_cast<double>(groups::gamma_d3().order()), 6));
  out.push_back(check_eq("order of Gamma~ (D3 x Z2)", static_cast<double>(groups::gamma_tilde().order()), 12));
  const GroupTable gl = groups::gl23();
  out.push_back(check_eq("order of GL(2,3) group", static_cast<double>(gl.order()), 48));
  out.push_back(check_eq("order of planar D3 group", static_cast<double>(groups::planar_d3().order()), 6));

  log("subspace inventory");
  int bad_dims = 0;
  for (const auto& e : enumerate_isotropy_gl23(gl)) bad_dims += e.space.dim() != (e.label[0] == 'L' ? 1 : 2);
  out.push_back(check_eq("GL(2,3) planes of dim 2 and axes of dim 1 (failures)", bad_dims, 0));
  int pred_mismatch = 0;
  for (const auto& el : gl.elements()) {
    const auto pred = dim_fix_two_predicate(decompose_rotation(el.matrix()));
    if (pred && *pred != (fixed_subspace(el).dim() == 2)) ++pred_mismatch;
  }
  out.push_back(check_eq("fix-dim-two predicate vs computed dimension (mismatches)", pred_mismatch, 0));
  out.push_back(check_le("|<L1(0,0), L2(0,0)>|", std::abs(gl23_axis_l1(0, 0)[0].dot(gl23_axis_l2(0, 0)[0])), 1e-12));

  log("equivariance");
  const VectorFieldSpec d3 = VectorFieldSpec::d3(CoeffsD3::reference_periodic());
  const VectorFieldSpec td = VectorFieldSpec::d3(CoeffsD3::reference_tilde());
  const VectorFieldSpec g = VectorFieldSpec::gl23(GLParametrization{0.8, 0.001});
  out.push_back(check_le("equivariance residual, D3 cubic", verify_equivariance(d3, 100, seed), 1e-9));
  out.push_back(check_le("equivariance residual, D3 x Z2 cubic", verify_equivariance(td, 100, seed), 1e-9));
  out.push_back(check_le("equivariance residual, GL(2,3) cubic", verify_equivariance(g, 100, seed), 1e-9));
  for (const auto& e : enumerate_isotropy_gl23(gl))
    if (e.label[0] == 'P') {
      double r = invariance_residual(g, e.space, 32, seed);
      out.push_back(check_le("flow invariance of " + e.label, r, 1e-10));
    }

  log("spectra");
  const auto eq_d3 = equilibria_on_axes(d3);
  out.push_back(check_le("D3 numeric vs closed-form eigenvalues", eigen_mismatch(d3, eq_d3), 1e-8));
  const CycleRates r = cycle_rates(eq_d3);
  const std::array<double, 4> expect{0.2041, 0.2834, 0.4834, 0.0041};
  const std::array<double, 4> got{r.c1, r.e1, r.c2, r.e2};
  double rate_err = 0;
  for (int i = 0; i < 4; ++i) rate_err = std::max(rate_err, std::abs(got[static_cast<std::size_t>(i)] - expect[static_cast<std::size_t>(i)]));
  out.push_back(check_le("D3 rates (c1, e1, c2, e2) vs reference values", rate_err, 5e-4));
  out.push_back(check_le("GL(2,3) numeric vs closed-form eigenvalues", eigen_mismatch(g, equilibria_on_axes(g)), 1e-8));

  log("quadrature and planar transits");
  const double s_ref = std::sqrt(std::numbers::pi) * std::tgamma(1.0 / 6.0) / (3.0 * std::tgamma(2.0 / 3.0));
  out.push_back(check_le("S(pi/3) vs Gamma-function value", std::abs(s_integral(std::numbers::pi / 3) - s_ref), 1e-8));
  const PlanarParams pp = PlanarParams::make(0.05, 1.0);
  double drift = 0, expo = 0;
  for (double r0 : {0.05, 0.3})
    for (double th : {0.2, 0.6, 0.9}) {
      const TransitResult tr = transit(pp, r0, th);
      drift = std::max(drift, tr.conserved_drift);
      expo = std::max(expo, tr.exponential_drift);
    }
  out.push_back(check_le("planar conserved-quantity drift", drift, 1e-6));
  out.push_back(check_le("planar exponential-invariant drift", expo, 1e-6));
  const double tau_num = transit(pp, 0.1, 0.0).tau;
  out.push_back(check_le("axis transit time vs closed form (relative)",
                         std::abs(tau_num - transit_time_axis(pp, 0.1)) / transit_time_axis(pp, 0.1), 1e-8));

  log("connections");
  const CycleGeometry geo = compute_connections(d3);
  out.push_back(check_eq("D3 kappa1 copies", static_cast<double>(geo.count(1)), 2));
  out.push_back(check_eq("D3 kappa2 copies", static_cast<double>(geo.count(2)), 6));
  double end_err = 0;
  for (const auto& p : geo.connections) {
    end_err = std::max(end_err, (p.points.front() - geo.equilibria[static_cast<std::size_t>(p.from)]).norm());
    end_err = std::max(end_err, (p.points.back() - geo.equilibria[static_cast<std::size_t>(p.to)]).norm());
  }
  out.push_back(check_le("connection endpoints vs equilibria", end_err, 1e-4));

  log("return maps");
  CycleData cd;
  cd.c1 = 0.204067;
  cd.e1 = 0.283406;
  cd.c2 = 0.483406;
  cd.Theta = 5 * std::numbers::pi / 6;
  cd.B12 = 1.0;
  cd.B22 = 0.8;
  cd.v01 = cd.v02 = 0.5;
  const Theorem2Result t2 = theorem2_analysis(cd, 1e-3);
  out.push_back(check_le("periodic-orbit fixed point residual", t2.residual, 1e-12));
  const CycleRates rt = cycle_rates(equilibria_on_axes(td));
  CycleData ct = cd.with_rates(rt);
  out.push_back(check_ge("contraction ratio h for D3 x Z2 coefficients", theorem3_contraction(ct, 0.01, 0.01).h, 1.0));
  return out;
}

inline int run_verify(const ScenarioConfig& c, Output& out) {
  detail::check_keys(c.block, "verify", {});
  const auto checks = verify_suite(c.seed, [&out](const std::string& s) { out.log(s); });
  json arr = json::array();
  int failed = 0;
  for (const auto& ch : checks) {
    json x;
    x["name"] = ch.name;
    x["value"] = ch.value;
    x["relation"] = ch.relation;
    x["bound"] = ch.bound;
    x["pass"] = ch.pass;
    arr.push_back(x);
    failed += ch.pass ? 0 : 1;
  }
  json j;
  j["seed"] = c.seed;
  j["checks"] = arr;
  j["failed"] = failed;
  out.write_json("verify.json", j);
  if (failed) throw DomainError("verify: " + std::to_string(failed) + " check(s) failed, see verify.json");
  return 0;
}

inline int run(const ScenarioConfig& c, Output& out) {
  switch (c.task) {
    case Task::Group: return run_group(c, out);
    case Task::Analyze: return run_analyze(c, out);
    case Task::Planar: return run_planar(c, out);
    case Task::Simulate: return run_simulate(c, out);
    case Task::Sweep: return run_sweep(c, out);
    case Task::ReturnMap: return run_returnmap(c, out);
    case Task::Census: return run_census(c, out);
    case Task::Verify: return run_verify(c, out);
  }
  return 2;
}

}  // namespace ps::cli
