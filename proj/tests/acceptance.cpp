// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pseudosimple/dynamics.hpp"
#include "pseudosimple/fields.hpp"
#include "pseudosimple/isotropy.hpp"
#include "pseudosimple/maps.hpp"
#include "pseudosimple/planar_d3.hpp"

using namespace ps;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

IntegratorConfig scenario_integrator(double max_time, double atol = 1e-12) { return {1e-10, atol, 0.0, max_time, 1e-3, true}; }

// Starting point used by the GL scenarios: first section plus a fixed offset.
ClassificationVerdict classify_gl(double h1, double h2) {
  const VectorFieldSpec spec = VectorFieldSpec::gl23(GLParametrization{h1, h2});
  const CycleGeometry geo = compute_connections(spec);
  ClassifyConfig cc;
  cc.integrator = scenario_integrator(20000);
  return classify_attractor(spec, geo.sections.at(0).point + Vec4(0.0005, -0.0005, 0.0005, 0.0005), geo, cc);
}

// ---------------------------------------------------------------------------

Outcome group_orders() {
  const std::size_t a = groups::gamma_d3().order(), b = groups::gamma_tilde().order(), c = groups::gl23().order();
  return {a == 6 && b == 12 && c == 48, "orders " + std::to_string(a) + "/" + std::to_string(b) + "/" + std::to_string(c)};
}

Outcome equivariance() {
  double worst = 0;
  for (const VectorFieldSpec& s : {VectorFieldSpec::d3(CoeffsD3::reference_periodic()), VectorFieldSpec::d3(CoeffsD3::reference_tilde()),
                                   VectorFieldSpec::gl23(GLParametrization{0.8, 0.001})})
    worst = std::max(worst, verify_equivariance(s, 100, 1));
  return {worst <= 1e-9, "max residual " + fmt(worst, 3) + " (bound 1e-9)"};
}

Outcome eigenvalues() {
  const auto eq = equilibria_on_axes(VectorFieldSpec::d3(CoeffsD3::reference_periodic()));
  const std::vector<std::pair<double, int>> want{{-0.2041, 2}, {0.2834, 1}, {-0.4834, 1}, {0.0041, 2}};
  double worst = 0;
  bool mult_ok = true;
  for (const auto& [value, mult] : want) {
    const EigenEntry* best = nullptr;
    double err = std::numeric_limits<double>::infinity();
    for (const auto& rep : eq)
      for (const auto& e : rep.eigen)
        if (std::abs(e.value - cplx(value, 0.0)) < err) {
          err = std::abs(e.value - cplx(value, 0.0));
          best = &e;
        }
    worst = std::max(worst, err);
    if (!best || best->multiplicity != mult || static_cast<int>(best->eigenspace.size()) != mult) mult_ok = false;
    if (best && mult == 2)
      for (const auto& v : best->eigenspace)
        if (std::hypot(v[0], v[1]) > 1e-8) mult_ok = false;
  }
  return {worst <= 5e-4 && mult_ok,
          "max |lambda - reference| " + fmt(worst, 3) + " (bound 5e-4), double eigenspaces in (x2,y2): " + (mult_ok ? "yes" : "no")};
}

Outcome s_integral_gamma() {
  const double ref = std::sqrt(kPi) * boost::math::tgamma(1.0 / 6.0) / (3.0 * boost::math::tgamma(2.0 / 3.0));
  const double err = std::abs(s_integral(kPi / 3) - ref);
  return {err <= 1e-8 && std::abs(ref - 2.42866) < 1e-5, "S(pi/3) = " + fmt(s_integral(kPi / 3), 12) + ", error " + fmt(err, 3)};
}

Outcome planar_invariants() {
  const std::vector<double> alphas{0.01, 0.05, 0.2, 0.5, 1.0}, betas{0.5, 2.0};
  const std::vector<std::pair<double, double>> starts{{0.01, 0.05}, {0.1, 0.3}, {0.3, 0.6}, {0.6, 0.9}, {0.9, 1.0}};
  double drift = 0, expo = 0, tau_err = 0;
  int transits = 0, l8_samples = 0, l8_fail = 0;
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double al : alphas)
    for (double be : betas) {
      const PlanarParams p = PlanarParams::make(al, be);
      for (const auto& [r0, th0] : starts) {
        const TransitResult tr = transit(p, r0, th0);
        drift = std::max(drift, tr.conserved_drift);
        expo = std::max(expo, tr.exponential_drift);
        ++transits;
        const double q = ts.integrate([&](double r) { return 1.0 / (al * r + be * r * r); }, r0, 1.0);
        tau_err = std::max(tau_err, std::abs(transit_time_axis(p, r0) - q) / q);
      }
      for (double r0 : {0.01, 0.1, 0.5})
        for (double th0 : {0.01, 0.1, 0.3, 0.5}) {
          const Lemma8Report rep = lemma8_bound_check(p, r0, th0);
          ++l8_samples;
          if (!(rep.strict && rep.tau_strict)) ++l8_fail;
        }
    }
  const bool ok = transits == 50 && drift <= 1e-6 && expo <= 1e-6 && tau_err <= 1e-8 && l8_fail == 0;
  return {ok, std::to_string(transits) + " transits, drifts " + fmt(drift, 3) + "/" + fmt(expo, 3) + ", axis tau rel. error " + fmt(tau_err, 3) +
                  ", exit-angle bound strict on " + std::to_string(l8_samples - l8_fail) + "/" + std::to_string(l8_samples)};
}

Outcome escape_census_d3() {
  const VectorFieldSpec spec = VectorFieldSpec::d3(CoeffsD3::reference_periodic());
  const CycleGeometry geo = compute_connections(spec);
  CensusConfig cc;
  cc.delta = 0.1;
  cc.samples = 200;
  cc.seed = 1;
  cc.max_time = 20000;
  const CensusResult r = escape_census(spec, geo, cc);
  return {r.escape_fraction >= 0.99, "escape fraction " + fmt(r.escape_fraction) + " over " + std::to_string(r.samples.size()) + " samples"};
}

Outcome periodic_orbit_d3() {
  const VectorFieldSpec spec = VectorFieldSpec::d3(CoeffsD3::reference_periodic());
  const CycleGeometry geo = compute_connections(spec);
  ClassifyConfig cc;
  cc.integrator = scenario_integrator(20000);
  const ClassificationVerdict v = classify_attractor(spec, geo.base[1].position + Vec4(0, 0.01, 0.003, 0.002), geo, cc);
  // Distinct connections crossed in one period, by type.
  std::set<int> copies[2];
  for (int s : v.period_sections) {
    const Section& sec = geo.sections.at(static_cast<std::size_t>(s));
    copies[sec.type - 1].insert(sec.connection);
  }
  const bool ok = v.kind == VerdictKind::PeriodicOrbit && v.closest_equilibrium[0] < 0.05 && v.closest_equilibrium[1] < 0.05 &&
                  copies[0].size() == 2 && copies[1].size() == 1;
  return {ok, std::string(verdict_name(v.kind)) + ", period " + fmt(v.period) + ", closest approach " + fmt(v.closest_equilibrium[0], 3) + "/" +
                  fmt(v.closest_equilibrium[1], 3) + ", connections per period: " + std::to_string(copies[0].size()) + " kappa1-type, " +
                  std::to_string(copies[1].size()) + " kappa2-type"};
}

Outcome converging_tilde() {
  const VectorFieldSpec spec = VectorFieldSpec::d3(CoeffsD3::reference_tilde());
  const CycleGeometry geo = compute_connections(spec);
  ClassifyConfig cc;
  cc.integrator = scenario_integrator(5000, 1e-300);
  const ClassificationVerdict v = classify_attractor(spec, geo.base[1].position + Vec4(0, 0.01, 0.003, 0.002), geo, cc);
  // Completed visits, including the transient; the trailing run of growing dwells is counted.
  std::vector<double> dwell;
  for (const auto& vis : v.visits) dwell.push_back(vis.t_out - vis.t_in);
  std::size_t run = dwell.empty() ? 0 : 1;
  for (std::size_t i = dwell.size(); i-- > 1 && dwell[i] > dwell[i - 1];) ++run;
  const bool increasing = run >= 5;
  const CycleRates r = cycle_rates(geo.base);
  const double h = r.c1 * r.c2 / (r.e1 * r.e2);
  const bool ok = v.kind == VerdictKind::ConvergesToCycle && v.min_dist < 1e-3 && increasing && h > 1.0 && std::abs(h - 2.32) < 0.01;
  return {ok, std::string(verdict_name(v.kind)) + ", min distance " + fmt(v.min_dist, 3) + ", " + std::to_string(run) + " of " +
                  std::to_string(dwell.size()) + " visits with increasing dwell times, h = " + fmt(h, 4)};
}

Outcome scaling() {
  CycleData cd;
  cd.c1 = 0.204067;
  cd.e1 = 0.283406;
  cd.c2 = 0.483406;
  cd.Theta = 5 * kPi / 6;
  cd.B12 = 1.0;
  cd.B22 = 0.8;
  cd.v01 = cd.v02 = 0.5;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (double mu : {1e-4, 3e-4, 1e-3, 3e-3, 1e-2}) {
    CycleData c = cd;
    c.e2 = mu;
    const IterationResult it = iterate_return_map(ReturnMapModel{ModelKind::PeriodicOrbit, c}, {1e-3, 0.0}, 200);
    if (it.exited || it.points.empty()) return {false, "return map left its domain at mu = " + fmt(mu)};
    const double a = std::log(mu), b = std::log(it.points.back().rho);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double want = 3 * cd.c1 / cd.e1;
  const double rel = std::abs(slope / want - 1.0);
  std::vector<double> dist;
  bool periodic = true;
  for (double h2 : {2e-4, 5e-4, 1e-3}) {
    const ClassificationVerdict v = classify_gl(0.8, h2);
    periodic = periodic && v.kind == VerdictKind::PeriodicOrbit;
    dist.push_back(v.max_dist);
  }
  const bool mono = dist[0] < dist[1] && dist[1] < dist[2];
  return {rel <= 0.01 && periodic && mono, "slope " + fmt(slope) + " vs 3c1/e1 = " + fmt(want) + " (rel. " + fmt(rel, 3) +
                                               "); GL h1 = 0.8 max distance " + fmt(dist[0], 4) + ", " + fmt(dist[1], 4) + ", " +
                                               fmt(dist[2], 4) + (periodic ? "" : " (not all periodic)")};
}

Outcome regime_split() {
  std::string detail;
  bool ok = true;
  for (double h1 : {0.7, 0.8, 0.92}) {
    const ClassificationVerdict v = classify_gl(h1, 0.001);
    ok = ok && v.kind == VerdictKind::PeriodicOrbit;
    detail += "(" + fmt(h1) + ",0.001) " + verdict_name(v.kind) + "; ";
  }
  std::vector<double> dist{classify_gl(0.92, 0.001).max_dist};
  for (double h2 : {0.002, 0.0028}) {
    const ClassificationVerdict v = classify_gl(0.92, h2);
    ok = ok && v.kind == VerdictKind::NonPeriodicBounded;
    dist.push_back(v.max_dist);
    detail += "(0.92," + fmt(h2) + ") " + verdict_name(v.kind) + "; ";
  }
  const bool mono = dist[0] < dist[1] && dist[1] < dist[2];
  detail += "max distance " + fmt(dist[0], 6) + ", " + fmt(dist[1], 6) + ", " + fmt(dist[2], 6) + (mono ? " increasing" : " not increasing");
  return {ok && mono, detail};
}

Outcome subspace_inventory() {
  const GroupTable g = groups::gl23();
  int order3 = 0, reflections = 0, bad = 0, mismatch = 0;
  for (std::size_t i = 0; i < g.order(); ++i) {
    const int idx = static_cast<int>(i);
    const Rotation4 rot = decompose_rotation(g[i].matrix());
    const bool refl = is_plane_reflection(rot);
    if (g.element_order(idx) == 3 || refl) {
      (refl ? reflections : order3)++;
      if (fixed_subspace(g, g.generated_subgroup({idx})).dim() != 2) ++bad;
    }
    const auto pred = dim_fix_two_predicate(rot);
    const int d = fixed_subspace(g[i]).dim();
    if (pred ? *pred != (d == 2) : d != 4) ++mismatch;
  }
  const double dot = std::abs(gl23_axis_l1(0, 0).basis()[0].dot(gl23_axis_l2(0, 0).basis()[0]));
  const bool ok = order3 > 0 && reflections > 0 && bad == 0 && mismatch == 0 && dot <= 1e-12;
  return {ok, std::to_string(order3) + " order-3 and " + std::to_string(reflections) + " plane-reflection subgroups, " + std::to_string(bad) +
                  " without a 2-d fixed space; predicate mismatches " + std::to_string(mismatch) + "; |<L1,L2>| = " + fmt(dot, 3)};
}

// ---------------------------------------------------------------------------
// Determinism: each shipped scenario twice through the CLI, outputs compared.

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

int run_cli(const fs::path& config, const fs::path& out) {
  const std::string cmd = "\"" PSEUDOSIMPLE_CLI "\" run --config \"" + config.string() + "\" --out \"" + out.string() + "\" >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("pseudosimple_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(PSEUDOSIMPLE_SCENARIOS))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  int identical = 0;
  std::string bad;
  for (const auto& c : configs) {
    const std::string name = c.stem().string();
    const int ra = run_cli(c, root / "a" / name), rb = run_cli(c, root / "b" / name);
    const auto sa = fs::exists(root / "a" / name) ? snapshot(root / "a" / name) : std::map<std::string, std::string>{};
    const auto sb = fs::exists(root / "b" / name) ? snapshot(root / "b" / name) : std::map<std::string, std::string>{};
    if (ra == 0 && rb == 0 && !sa.empty() && sa == sb) ++identical;
    else bad += " " + name + "(exit " + std::to_string(ra) + "/" + std::to_string(rb) + ")";
  }
  fs::remove_all(root);
  const bool has_verify = std::any_of(configs.begin(), configs.end(), [](const fs::path& p) { return p.stem() == "verify"; });
  return {has_verify && identical == static_cast<int>(configs.size()),
          std::to_string(identical) + "/" + std::to_string(configs.size()) + " scenarios byte-identical" + (bad.empty() ? "" : ", differing:" + bad)};
}

struct Criterion {
  int id;
  std::string title;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "group orders", 1, group_orders},
      {2, "equivariance", 1, equivariance},
      {3, "reference eigenvalues", 1, eigenvalues},
      {4, "S(pi/3) closed form", 1, s_integral_gamma},
      {5, "planar invariants", 10, planar_invariants},
      {6, "escape census (complete instability)", 120, escape_census_d3},
      {7, "periodic orbit near the D3 cycle", 60, periodic_orbit_d3},
      {8, "convergence to the D3 x Z2 cycle", 120, converging_tilde},
      {9, "fixed-point scaling", 300, scaling},
      {10, "GL(2,3) regime split", 600, regime_split},
      {11, "subspace inventory", 1, subspace_inventory},
      {12, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " A" << c.id << " " << c.title << ": " << o.detail << " [" << fmt(secs, 3) << " s"
              << (c.limit_s > 0 ? ", limit " + fmt(c.limit_s) + " s" : "") << (in_time ? "" : ", over time") << "]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
