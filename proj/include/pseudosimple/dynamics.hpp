#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fields.hpp"
#include "group.hpp"
#include "ode.hpp"

namespace ps {

// ---------------------------------------------------------------------------
// Trajectories

enum class Termination { MaxTime, EscapeRadius, Converged };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::MaxTime: return "max-time";
    case Termination::EscapeRadius: return "escape-radius";
    case Termination::Converged: return "converged";
  }
  return "?";
}

struct TrajectoryRecord {
  int dim = 4;
  std::vector<double> t;
  std::vector<Vec4> x;  // planar states padded with zeros
  StepStats stats;
  Termination reason = Termination::MaxTime;
};

struct IntegrateOptions {
  double sample_dt = 0.0;  // 0: one sample per accepted step
  double escape_radius = std::numeric_limits<double>::infinity();
  double converge_tol = 0.0;  // stop once |f(x)| falls below this (0: off)
};

namespace detail {

template <std::size_t N>
auto field_functor(const VectorFieldSpec& spec) {
  return [&spec](const State<N>& x, State<N>& dx) { spec.eval(x.data(), dx.data()); };
}

template <std::size_t N>
TrajectoryRecord integrate_n(const VectorFieldSpec& spec, const Eigen::VectorXd& x0, const IntegratorConfig& cfg,
                             const IntegrateOptions& opt) {
  State<N> s0;
  for (std::size_t i = 0; i < N; ++i) s0[i] = x0[static_cast<Eigen::Index>(i)];
  auto st = make_stepper<N>(field_functor<N>(spec), s0, 0.0, cfg);
  TrajectoryRecord rec;
  rec.dim = static_cast<int>(N);
  auto push = [&rec](double t, const State<N>& s) {
    Vec4 v = Vec4::Zero();
    for (std::size_t i = 0; i < N; ++i) v[static_cast<Eigen::Index>(i)] = s[i];
    rec.t.push_back(t);
    rec.x.push_back(v);
  };
  push(0.0, s0);
  std::size_t next_index = 1;
  double next_sample = opt.sample_dt;
  while (st.time() < cfg.max_time) {
    const auto [t0, t1] = st.step();
    const double tend = std::min(t1, cfg.max_time);
    if (opt.sample_dt > 0) {
      while (next_sample <= tend) {
        push(next_sample, st.state_at(next_sample));
        next_sample = static_cast<double>(++next_index) * opt.sample_dt;
      }
    } else {
      push(tend, t1 <= cfg.max_time ? st.state() : st.state_at(tend));
    }
    const State<N>& x = st.state();
    double n2 = 0;
    for (double v : x) n2 += v * v;
    if (std::sqrt(n2) > opt.escape_radius) {
      rec.reason = Termination::EscapeRadius;
      break;
    }
    if (opt.converge_tol > 0) {
      State<N> f{};
      spec.eval(x.data(), f.data());
      double fn = 0;
      for (double v : f) fn += v * v;
      if (std::sqrt(fn) < opt.converge_tol) {
        rec.reason = Termination::Converged;
        break;
      }
    }
  }
  rec.stats = st.stats();
  return rec;
}

}  // namespace detail

/// Adaptive Dormand-Prince integration of x' = f(x) from t = 0 to cfg.max_time.
inline TrajectoryRecord integrate(const VectorFieldSpec& spec, const Eigen::VectorXd& x0, const IntegratorConfig& cfg,
                                  const IntegrateOptions& opt = {}) {
  if (x0.size() != spec.dim()) throw DomainError("integrate: initial state has wrong dimension");
  if (!x0.allFinite()) throw DomainError("integrate: initial state is not finite");
  if (!(cfg.rtol > 0 && cfg.atol > 0) || !std::isfinite(cfg.max_time))
    throw DomainError("integrate: tolerances must be positive and max_time finite");
  if (spec.dim() == 2) return detail::integrate_n<2>(spec, x0, cfg, opt);
  return detail::integrate_n<4>(spec, x0, cfg, opt);
}

/// Flow map x -> phi_T(x) for the 4-d families.
inline Vec4 flow(const VectorFieldSpec& spec, const Vec4& x0, double T, const IntegratorConfig& cfg) {
  if (T <= 0) return x0;
  State<4> s{x0[0], x0[1], x0[2], x0[3]};
  auto st = make_stepper<4>(detail::field_functor<4>(spec), s, 0.0, cfg);
  while (st.time() < T) st.step();
  const State<4> e = st.state_at(T);
  return {e[0], e[1], e[2], e[3]};
}

// ---------------------------------------------------------------------------
// Cycle geometry

struct Polyline {
  int type = 0;  // 1: kappa1-type (from xi1 copy), 2: kappa2-type
  int from = -1, to = -1;  // indices into CycleGeometry::equilibria
  std::vector<Vec4> points;
  LinearSubspace plane;
  // Axis-aligned boxes over chunks of consecutive segments, and over the whole.
  struct Box {
    Vec4 lo, hi;
    std::size_t first = 0, last = 0;  // segment range [first, last)
  };
  std::vector<Box> chunks;
  Box bounds;

  void build_index(std::size_t chunk = 16) {
    chunks.clear();
    const std::size_t nseg = points.size() > 1 ? points.size() - 1 : 0;
    for (std::size_t s = 0; s < nseg; s += chunk) {
      Box b;
      b.first = s;
      b.last = std::min(nseg, s + chunk);
      b.lo = points[s];
      b.hi = points[s];
      for (std::size_t i = s; i <= b.last; ++i) {
        b.lo = b.lo.cwiseMin(points[i]);
        b.hi = b.hi.cwiseMax(points[i]);
      }
      chunks.push_back(b);
    }
    bounds.lo = points.front();
    bounds.hi = points.front();
    for (const auto& p : points) {
      bounds.lo = bounds.lo.cwiseMin(p);
      bounds.hi = bounds.hi.cwiseMax(p);
    }
    bounds.first = 0;
    bounds.last = nseg;
  }

  double length() const {
    double l = 0;
    for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
    return l;
  }

  /// Point at fraction s in [0,1] of arclength, with the unit tangent there.
  std::pair<Vec4, Vec4> at_arclength(double s) const {
    const double target = s * length();
    double acc = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      const double seg = (points[i] - points[i - 1]).norm();
      if (acc + seg >= target && seg > 0) {
        const double u = (target - acc) / seg;
        return {points[i - 1] + u * (points[i] - points[i - 1]), (points[i] - points[i - 1]) / seg};
      }
      acc += seg;
    }
    return {points.back(), Vec4::Zero()};
  }
};

inline double box_distance(const Polyline::Box& b, const Vec4& x) {
  const Vec4 d = (b.lo - x).cwiseMax(x - b.hi).cwiseMax(Vec4::Zero());
  return d.norm();
}

inline double segment_distance(const Vec4& a, const Vec4& b, const Vec4& x) {
  const Vec4 ab = b - a;
  const double l2 = ab.squaredNorm();
  const double u = l2 > 0 ? std::clamp((x - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (a + u * ab - x).norm();
}

struct Section {
  Vec4 point, normal;
  int connection = -1;  // index into CycleGeometry::connections
  int type = 0;
  double radius = 0.2;
};

struct CycleGeometry {
  std::vector<EquilibriumReport> base;  // xi1, xi2
  std::vector<Vec4> equilibria;         // group orbits of xi1 and xi2
  std::vector<int> equilibrium_type;    // 1 or 2
  std::vector<Polyline> connections;    // group orbits of the computed connections
  std::vector<Section> sections;        // one per connection, at its arclength midpoint
  std::shared_ptr<const GroupTable> group;

  std::size_t count(int type) const {
    return static_cast<std::size_t>(std::count_if(connections.begin(), connections.end(), [type](const Polyline& p) { return p.type == type; }));
  }
};

/// Minimum Euclidean distance from x to the connections and equilibria.
inline double distance_to_cycle(const Vec4& x, const CycleGeometry& geo) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : geo.equilibria) best = std::min(best, (x - e).norm());
  // Visit polylines in order of their bounding-box distance.
  std::vector<std::pair<double, const Polyline*>> order;
  order.reserve(geo.connections.size());
  for (const auto& p : geo.connections) order.emplace_back(box_distance(p.bounds, x), &p);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [bd, p] : order) {
    if (bd >= best) break;
    for (const auto& c : p->chunks) {
      if (box_distance(c, x) >= best) continue;
      for (std::size_t s = c.first; s < c.last; ++s) best = std::min(best, segment_distance(p->points[s], p->points[s + 1], x));
    }
  }
  return best;
}

struct ConnectionConfig {
  double eta = 1e-7;         // initial displacement along the unstable direction
  double arrive_tol = 1e-6;  // success radius around the target equilibrium
  double max_time = 2e5;
  double max_spacing = 5e-3;  // polyline point spacing
  IntegratorConfig integrator{1e-11, 1e-15, 0.0, 2e5, 1e-3, true};
};

namespace detail {

inline std::vector<Vec4> group_orbit(const GroupTable& g, const Vec4& x, double tol = 1e-8) {
  std::vector<Vec4> out;
  for (const auto& el : g.elements()) {
    const Vec4 y = el * x;
    if (std::none_of(out.begin(), out.end(), [&](const Vec4& o) { return (o - y).norm() <= tol; })) out.push_back(y);
  }
  return out;
}

/// Distinct two-dimensional fixed spaces of single group elements that
/// contain the direction u.
inline std::vector<LinearSubspace> planes_through(const GroupTable& g, const Vec4& u) {
  std::vector<LinearSubspace> out;
  for (const auto& el : g.elements()) {
    if (el.is_identity()) continue;
    LinearSubspace f = fixed_subspace(el);
    if (f.dim() != 2 || !f.contains(u, 1e-9)) continue;
    if (std::none_of(out.begin(), out.end(), [&](const LinearSubspace& o) { return o.same_as(f, 1e-8); })) out.push_back(f);
  }
  return out;
}

struct Branch {
  bool ok = false;
  int target = -1;
  std::vector<Vec4> points;
};

// Integrates the in-plane unstable branch from an equilibrium in plane
// coordinates, so the trajectory cannot leave the plane through roundoff.
inline Branch shoot_in_plane(const VectorFieldSpec& spec, const LinearSubspace& plane, const Vec4& start,
                             const Vec4& direction, const std::vector<Vec4>& targets, const std::vector<int>& target_ids,
                             const ConnectionConfig& cc) {
  const Eigen::Matrix<double, 4, 2> B = plane.basis_matrix();
  auto f = [&spec, &B](const State<2>& y, State<2>& dy) {
    const Vec4 x = B * Eigen::Vector2d(y[0], y[1]);
    Vec4 fx;
    spec.eval(x.data(), fx.data());
    const Eigen::Vector2d r = B.transpose() * fx;
    dy = {r[0], r[1]};
  };
  const Eigen::Vector2d y0 = B.transpose() * (start + cc.eta * direction);
  IntegratorConfig cfg = cc.integrator;
  cfg.max_time = cc.max_time;
  auto st = make_stepper<2>(f, State<2>{y0[0], y0[1]}, 0.0, cfg);
  Branch br;
  br.points.push_back(start);
  auto lift = [&B](const State<2>& y) -> Vec4 { return B * Eigen::Vector2d(y[0], y[1]); };
  br.points.push_back(lift({y0[0], y0[1]}));
  const double scale = std::max(1.0, start.norm());
  while (st.time() < cc.max_time) {
    const auto [t0, t1] = st.step();
    const Vec4 x1 = lift(st.state());
    const int pieces = std::max(1, static_cast<int>(std::ceil((x1 - br.points.back()).norm() / cc.max_spacing)));
    for (int k = 1; k < pieces; ++k) br.points.push_back(lift(st.state_at(t0 + (t1 - t0) * k / pieces)));
    br.points.push_back(x1);
    if (x1.norm() > 10.0 * scale) return br;
    for (std::size_t k = 0; k < targets.size(); ++k)
      if ((x1 - targets[k]).norm() < cc.arrive_tol) {
        br.points.push_back(targets[k]);
        br.ok = true;
        br.target = target_ids[k];
        return br;
      }
  }
  return br;
}

inline bool same_polyline(const std::vector<Vec4>& a, const std::vector<Vec4>& b, double tol = 1e-6) {
  if ((a.front() - b.front()).norm() > tol || (a.back() - b.back()).norm() > tol) return false;
  const Vec4 ma = a[a.size() / 2];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < b.size(); ++i) best = std::min(best, segment_distance(b[i - 1], b[i], ma));
  return best <= 1e-4;
}

}  // namespace detail

/// Saddle-sink connections of the cycle and their group orbit.
///
/// For each base equilibrium and each fixed-point plane through its axis,
/// the in-plane unstable branch (both signs) is integrated until it lands
/// within arrive_tol of a group copy of the other equilibrium.
inline CycleGeometry compute_connections(const VectorFieldSpec& spec, const ConnectionConfig& cc = {}) {
  if (spec.dim() != 4) throw DomainError("compute_connections: four-dimensional family required");
  CycleGeometry geo;
  geo.group = spec.group_ptr();
  const GroupTable& g = spec.group();
  geo.base = equilibria_on_axes(spec);
  for (int j = 0; j < 2; ++j)
    for (const Vec4& e : detail::group_orbit(g, geo.base[static_cast<std::size_t>(j)].position)) {
      geo.equilibria.push_back(e);
      geo.equilibrium_type.push_back(j + 1);
    }
  auto index_of = [&geo](const Vec4& x) {
    for (std::size_t i = 0; i < geo.equilibria.size(); ++i)
      if ((geo.equilibria[i] - x).norm() < 1e-8) return static_cast<int>(i);
    return -1;
  };

  std::vector<Polyline> found;
  for (int j = 0; j < 2; ++j) {
    const EquilibriumReport& eq = geo.base[static_cast<std::size_t>(j)];
    const int other_type = 2 - j;
    const Mat4 J = spec.jacobian(eq.position.data());
    bool any = false;
    for (const LinearSubspace& plane : detail::planes_through(g, eq.axis)) {
      const Eigen::Matrix<double, 4, 2> B = plane.basis_matrix();
      const Eigen::Matrix2d Jr = B.transpose() * J * B;
      Eigen::EigenSolver<Eigen::Matrix2d> es(Jr);
      for (int k = 0; k < 2; ++k) {
        if (std::abs(es.eigenvalues()[k].imag()) > 1e-12 || es.eigenvalues()[k].real() <= 0) continue;
        Vec4 v = B * es.eigenvectors().col(k).real();
        v.normalize();
        if (std::abs(v.dot(eq.axis)) > 1 - 1e-6) continue;
        std::vector<Vec4> targets;
        std::vector<int> ids;
        for (std::size_t i = 0; i < geo.equilibria.size(); ++i)
          if (geo.equilibrium_type[i] == other_type && plane.contains(geo.equilibria[i], 1e-8)) {
            targets.push_back(geo.equilibria[i]);
            ids.push_back(static_cast<int>(i));
          }
        for (double sign : {1.0, -1.0}) {
          auto br = detail::shoot_in_plane(spec, plane, eq.position, sign * LinearSubspace::canonical_sign(v), targets, ids, cc);
          if (!br.ok) continue;
          Polyline p;
          p.type = j + 1;
          p.from = index_of(eq.position);
          p.to = br.target;
          p.points = std::move(br.points);
          p.plane = plane;
          found.push_back(std::move(p));
          any = true;
        }
      }
    }
    if (!any) throw NoConnection("compute_connections: no unstable branch of " + eq.label + " reaches a sink copy");
  }
  // Group orbit of every connection found.
  for (const Polyline& base : found)
    for (const auto& el : g.elements()) {
      Polyline p = base;
      for (auto& x : p.points) x = el * x;
      if (std::any_of(geo.connections.begin(), geo.connections.end(),
                      [&](const Polyline& o) { return detail::same_polyline(o.points, p.points); }))
        continue;
      p.plane = base.plane.transformed(el);
      p.from = index_of(p.points.front());
      p.to = index_of(p.points.back());
      p.build_index();
      geo.connections.push_back(std::move(p));
    }
  // Sections at midpoints; the capture radius stays below half the distance
  // between neighbouring midpoints.
  for (std::size_t i = 0; i < geo.connections.size(); ++i) {
    const auto [m, tan] = geo.connections[i].at_arclength(0.5);
    geo.sections.push_back({m, tan, static_cast<int>(i), geo.connections[i].type, 0.2});
  }
  for (auto& s : geo.sections)
    for (const auto& o : geo.sections)
      if (&s != &o) s.radius = std::min(s.radius, 0.45 * (s.point - o.point).norm());
  return geo;
}

// ---------------------------------------------------------------------------
// Classification

enum class VerdictKind { EscapesNeighborhood, PeriodicOrbit, ConvergesToCycle, NonPeriodicBounded, Inconclusive };

inline const char* verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::EscapesNeighborhood: return "EscapesNeighborhood";
    case VerdictKind::PeriodicOrbit: return "PeriodicOrbit";
    case VerdictKind::ConvergesToCycle: return "ConvergesToCycle";
    case VerdictKind::NonPeriodicBounded: return "NonPeriodicBounded";
    case VerdictKind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct ClassifyConfig {
  IntegratorConfig integrator{1e-10, 1e-12, 0.0, 20000.0, 1e-3, true};
  double delta_escape = 0.5;
  double transient = 0.2;  // fraction of max_time skipped before statistics
  double visit_radius = 0.05;
  double period_tol = 1e-6;
  double period_time_rtol = 1e-4;  // agreement of matched return intervals
  double dwell_growth = 1e-3;      // relative increase counted as a longer dwell
  int period_confirmations = 3;
  int max_lag = 48;
  double converge_distance = 1e-3;
  int min_monotone_visits = 5;
};

struct Crossing {
  double t;
  int section;
  Vec4 x;
};

struct Visit {
  int equilibrium;
  double t_in, t_out;
  double min_distance;
};

struct ClassificationVerdict {
  VerdictKind kind = VerdictKind::Inconclusive;
  std::string note;
  double period = 0.0;
  int crossings_per_period = 0;
  Vec4 orbit_point = Vec4::Zero();  // a section crossing on the detected orbit
  double min_dist = 0.0, max_dist = 0.0;  // distance to X after the transient
  double final_window_max_dist = 0.0;
  std::vector<double> dwell_times;  // completed visits after the transient
  std::vector<Visit> visits;        // all visits, including the transient
  std::vector<Crossing> crossings;  // all section crossings
  std::vector<int> period_sections;  // sections crossed in one period
  double section_dispersion = 0.0;   // spread of returns to the most visited section
  double escape_time = 0.0;
  double end_time = 0.0;  // integration end (earlier than max_time when precision is exhausted)
  double closest_equilibrium[2] = {0, 0};  // min distance to xi1- and xi2-type copies after the transient
};

namespace detail {

inline int nearest_equilibrium(const CycleGeometry& geo, const Vec4& x, double radius) {
  for (std::size_t i = 0; i < geo.equilibria.size(); ++i)
    if ((geo.equilibria[i] - x).norm() < radius) return static_cast<int>(i);
  return -1;
}

}  // namespace detail

/// Integrates from x0 and classifies the long-time behaviour relative to the cycle X.
inline ClassificationVerdict classify_attractor(const VectorFieldSpec& spec, const Vec4& x0, const CycleGeometry& geo,
                                                const ClassifyConfig& cc = {}) {
  ClassificationVerdict v;
  const double T = cc.integrator.max_time;
  const double t_stat = cc.transient * T;
  std::vector<std::pair<double, double>> dist_history;  // (t, distance) after the transient
  auto st = make_stepper<4>(detail::field_functor<4>(spec), State<4>{x0[0], x0[1], x0[2], x0[3]}, 0.0, cc.integrator);
  auto vec = [](const State<4>& s) { return Vec4(s[0], s[1], s[2], s[3]); };

  v.min_dist = std::numeric_limits<double>::infinity();
  v.closest_equilibrium[0] = v.closest_equilibrium[1] = std::numeric_limits<double>::infinity();
  int inside = detail::nearest_equilibrium(geo, x0, cc.visit_radius);
  double t_in = 0.0, visit_min = inside >= 0 ? (x0 - geo.equilibria[static_cast<std::size_t>(inside)]).norm() : 0.0;
  std::vector<double> sec_val(geo.sections.size());
  for (std::size_t i = 0; i < geo.sections.size(); ++i) sec_val[i] = geo.sections[i].normal.dot(x0 - geo.sections[i].point);

  bool escaped = false, exhausted = false;
  while (st.time() < T) {
    const auto [t0, t1] = st.step();
    const Vec4 x = vec(st.state());
    // Components shrinking toward the subnormal range carry no more information.
    if (std::any_of(st.state().begin(), st.state().end(), [](double c) { return c != 0.0 && std::abs(c) < 1e-280; })) {
      exhausted = true;
      break;
    }
    const double d = distance_to_cycle(x, geo);
    if (d > cc.delta_escape) {
      escaped = true;
      v.escape_time = t1;
      break;
    }
    if (t1 >= t_stat) {
      v.min_dist = std::min(v.min_dist, d);
      v.max_dist = std::max(v.max_dist, d);
      dist_history.emplace_back(t1, d);
      for (std::size_t i = 0; i < geo.equilibria.size(); ++i) {
        double& c = v.closest_equilibrium[geo.equilibrium_type[i] - 1];
        c = std::min(c, (x - geo.equilibria[i]).norm());
      }
    }
    // Equilibrium visits, with entry and exit refined on the dense output.
    if (inside >= 0) {
      const Vec4& e = geo.equilibria[static_cast<std::size_t>(inside)];
      visit_min = std::min(visit_min, (x - e).norm());
      if ((x - e).norm() >= cc.visit_radius) {
        const double te = locate_event(st, [&](const State<4>& s) { return (vec(s) - e).norm() - cc.visit_radius; }, t0, t1, 1e-9);
        v.visits.push_back({inside, t_in, te, visit_min});
        inside = -1;
      }
    }
    if (inside < 0) {
      const int k = detail::nearest_equilibrium(geo, x, cc.visit_radius);
      if (k >= 0) {
        const Vec4& e = geo.equilibria[static_cast<std::size_t>(k)];
        t_in = locate_event(st, [&](const State<4>& s) { return (vec(s) - e).norm() - cc.visit_radius; }, t0, t1, 1e-9);
        inside = k;
        visit_min = (x - e).norm();
      }
    }
    // Section crossings (upward through the hyperplane, inside the capture ball).
    for (std::size_t i = 0; i < geo.sections.size(); ++i) {
      const Section& s = geo.sections[i];
      const double val = s.normal.dot(x - s.point);
      if (sec_val[i] < 0 && val >= 0 && (x - s.point).norm() < 2 * s.radius) {
        const double tc = locate_event(st, [&](const State<4>& y) { return s.normal.dot(vec(y) - s.point); }, t0, t1, 1e-12);
        const Vec4 xc = vec(st.state_at(tc));
        if ((xc - s.point).norm() < s.radius) v.crossings.push_back({tc, static_cast<int>(i), xc});
      }
      sec_val[i] = val;
    }
  }
  if (!std::isfinite(v.min_dist)) v.min_dist = 0.0;
  v.end_time = st.time();
  // Last tenth of the statistics window actually integrated.
  const double t_final = v.end_time - 0.1 * std::max(0.0, v.end_time - t_stat);
  for (const auto& [t, d] : dist_history)
    if (t >= t_final) v.final_window_max_dist = std::max(v.final_window_max_dist, d);
  if (exhausted) v.note = "stopped at t = " + std::to_string(v.end_time) + ": state reached the underflow range; ";

  if (escaped) {
    v.kind = VerdictKind::EscapesNeighborhood;
    v.note = "distance to X exceeded delta_escape at t = " + std::to_string(v.escape_time);
    return v;
  }

  for (const auto& vis : v.visits)
    if (vis.t_in >= t_stat) v.dwell_times.push_back(vis.t_out - vis.t_in);

  // Periodicity: smallest lag p with matching section and |dx| < tol for the
  // last few crossings.
  std::vector<Crossing> late;
  for (const auto& c : v.crossings)
    if (c.t >= t_stat) late.push_back(c);
  const int n = static_cast<int>(late.size());
  for (int p = 1; p <= cc.max_lag && p + cc.period_confirmations <= n; ++p) {
    // Returns must match in position and in return time; near a
    // heteroclinic cycle positions also converge but return times grow.
    bool ok = true;
    const double interval = late[static_cast<std::size_t>(n - 1)].t - late[static_cast<std::size_t>(n - 1 - p)].t;
    for (int k = 0; k < cc.period_confirmations && ok; ++k) {
      const auto& a = late[static_cast<std::size_t>(n - 1 - k)];
      const auto& b = late[static_cast<std::size_t>(n - 1 - k - p)];
      ok = a.section == b.section && (a.x - b.x).norm() < cc.period_tol &&
           std::abs((a.t - b.t) - interval) <= cc.period_time_rtol * interval;
    }
    if (ok) {
      v.kind = VerdictKind::PeriodicOrbit;
      const auto& a = late.back();
      const auto& b = late[static_cast<std::size_t>(n - 1 - p)];
      v.period = a.t - b.t;
      v.crossings_per_period = p;
      v.orbit_point = a.x;
      for (int k = 0; k < p; ++k) v.period_sections.push_back(late[static_cast<std::size_t>(n - 1 - k)].section);
      std::sort(v.period_sections.begin(), v.period_sections.end());
      v.note += "section returns repeat with lag " + std::to_string(p);
      return v;
    }
  }

  // Dispersion of returns to the most frequently crossed section.
  if (!late.empty()) {
    std::map<int, std::vector<Vec4>> by;
    for (const auto& c : late) by[c.section].push_back(c.x);
    const auto most = std::max_element(by.begin(), by.end(), [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });
    Vec4 mean = Vec4::Zero();
    for (const auto& x : most->second) mean += x;
    mean /= static_cast<double>(most->second.size());
    double var = 0;
    for (const auto& x : most->second) var += (x - mean).squaredNorm();
    v.section_dispersion = std::sqrt(var / static_cast<double>(most->second.size()));
  }

  // Convergence to the cycle: growing dwell times and vanishing distance.
  // The run of increasing dwell times must end at the last visit.
  auto longer = [&cc](double a, double b) { return a > b * (1.0 + cc.dwell_growth); };
  std::size_t run = v.visits.empty() ? 0 : 1;
  for (std::size_t i = 1; i < v.visits.size(); ++i)
    run = longer(v.visits[i].t_out - v.visits[i].t_in, v.visits[i - 1].t_out - v.visits[i - 1].t_in) ? run + 1 : 1;
  // A visit still in progress at the end counts when it already outlasts the last completed one.
  const bool open_visit = inside >= 0;
  const double open_dwell = open_visit ? st.time() - t_in : 0.0;
  if (open_visit && !v.visits.empty() && longer(open_dwell, v.visits.back().t_out - v.visits.back().t_in)) ++run;
  const bool monotone = static_cast<int>(run) >= cc.min_monotone_visits;
  if (monotone && v.final_window_max_dist < cc.converge_distance) {
    v.kind = VerdictKind::ConvergesToCycle;
    v.note += "dwell times increase over the last " + std::to_string(run) + " visits";
    if (open_visit) v.dwell_times.push_back(open_dwell);
    return v;
  }
  if (late.size() < 8) {
    v.kind = VerdictKind::Inconclusive;
    v.note += "too few section returns (" + std::to_string(late.size()) + ") after the transient";
    if (open_visit) v.note += "; trajectory near an equilibrium at the end";
    return v;
  }
  v.kind = VerdictKind::NonPeriodicBounded;
  v.note += "no repeating section return within tolerance";
  return v;
}

// ---------------------------------------------------------------------------
// Census and sweeps

namespace detail {

/// Runs job(i) for i in [0, n) on up to `threads` workers; results are
/// written by index, so ordering is independent of scheduling.
template <class Job>
void parallel_for(std::size_t n, int threads, Job&& job) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

inline bool on_invariant_subspace(const GroupTable& g, const Vec4& x, double tol) {
  for (const auto& el : g.elements())
    if (!el.is_identity() && (el * x - x).norm() <= tol) return true;
  return false;
}

}  // namespace detail

struct CensusConfig {
  double delta = 0.1;
  std::size_t samples = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_time = 20000.0;
  double converge_distance = 1e-3;  // attracted runs stay this close to X over the second half
  IntegratorConfig integrator{1e-10, 1e-12, 0.0, 20000.0, 1e-3, true};
  bool allow_invariant = false;  // keep samples on fixed-point subspaces
  double invariant_exclusion = 1e-6;
};

struct CensusSample {
  Vec4 x0;
  bool escaped = false;
  double exit_time = 0.0;   // time of leaving the delta-tube, if it happened
  double final_distance = 0.0;  // max distance to X over the second half of the run
};

struct CensusResult {
  double escape_fraction = 0.0;
  std::vector<CensusSample> samples;
};

/// Draws a point uniformly along X (by arclength) displaced uniformly in the
/// delta-ball, rejecting points outside the tube or on invariant subspaces.
inline Vec4 sample_tube(const CycleGeometry& geo, double delta, std::mt19937_64& rng, bool allow_invariant, double excl) {
  std::vector<double> len;
  for (const auto& p : geo.connections) len.push_back(p.length());
  std::discrete_distribution<std::size_t> pick(len.begin(), len.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const auto& p = geo.connections[pick(rng)];
    const Vec4 c = p.at_arclength(u(rng)).first;
    Vec4 dir(nd(rng), nd(rng), nd(rng), nd(rng));
    dir.normalize();
    const Vec4 x = c + delta * std::pow(u(rng), 0.25) * dir;
    if (distance_to_cycle(x, geo) >= delta) continue;
    if (!allow_invariant && detail::on_invariant_subspace(*geo.group, x, excl)) continue;
    return x;
  }
  throw DomainError("sample_tube: could not place a sample in the tube");
}

/// Fraction of tube samples that are not attracted to X: they either leave
/// the delta-tube or fail to approach X within the run.
inline CensusResult escape_census(const VectorFieldSpec& spec, const CycleGeometry& geo, const CensusConfig& cc) {
  CensusResult res;
  res.samples.resize(cc.samples);
  for (std::size_t i = 0; i < cc.samples; ++i) {
    std::mt19937_64 rng(cc.seed * 1000003ULL + i);
    res.samples[i].x0 = sample_tube(geo, cc.delta, rng, cc.allow_invariant, cc.invariant_exclusion);
  }
  detail::parallel_for(cc.samples, cc.threads, [&](std::size_t i) {
    CensusSample& s = res.samples[i];
    IntegratorConfig ic = cc.integrator;
    ic.max_time = cc.max_time;
    auto st = make_stepper<4>(detail::field_functor<4>(spec), State<4>{s.x0[0], s.x0[1], s.x0[2], s.x0[3]}, 0.0, ic);
    const double t_final = 0.5 * cc.max_time;
    while (st.time() < cc.max_time) {
      st.step();
      const auto& y = st.state();
      const double d = distance_to_cycle(Vec4(y[0], y[1], y[2], y[3]), geo);
      if (d > cc.delta) {
        s.escaped = true;
        s.exit_time = st.time();
        return;
      }
      if (st.time() >= t_final) s.final_distance = std::max(s.final_distance, d);
    }
    s.escaped = !(s.final_distance < cc.converge_distance);
  });
  std::size_t esc = 0;
  for (const auto& s : res.samples) esc += s.escaped ? 1 : 0;
  res.escape_fraction = cc.samples ? static_cast<double>(esc) / static_cast<double>(cc.samples) : 0.0;
  return res;
}

struct SweepRow {
  std::map<std::string, double> params;
  std::optional<ClassificationVerdict> verdict;
  std::string error;  // non-empty when the row failed
};

/// Classifies one trajectory per grid point. `make_case` maps a grid point to
/// (spec, initial state); failures are recorded per row.
template <class MakeCase>
std::vector<SweepRow> sweep(const std::vector<std::map<std::string, double>>& grid, MakeCase&& make_case,
                            const ClassifyConfig& cc, int threads = 1) {
  std::vector<SweepRow> rows(grid.size());
  detail::parallel_for(grid.size(), threads, [&](std::size_t i) {
    rows[i].params = grid[i];
    try {
      const auto [spec, x0] = make_case(grid[i]);
      const CycleGeometry geo = compute_connections(spec);
      rows[i].verdict = classify_attractor(spec, x0, geo, cc);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

}  // namespace ps
