#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "planar_d3.hpp"
#include "quadrature.hpp"

namespace ps {

// Leading-order Poincare-map models near a heteroclinic cycle xi1 -> xi2 -> xi1.
//
// Sections: H_in1 (w, q) -> phi1 -> H_out1 (rho, theta) -> psi1 -> H_in2 (rho, theta)
//           -> phi2 -> H_out2 (v, q) -> psi2 -> H_in1 (w, q).

struct CycleData {
  double c1 = 0.2041, e1 = 0.2834, c2 = 0.4834, e2 = 0.0041;
  double A = 1.0;
  double Theta = 0.0;
  double B11 = 1.0, B12 = 1.0, B21 = 0.0, B22 = 1.0;
  double v01 = 1.0, v02 = 1.0;
  double beta = 1.0;
  int k = 3;

  void validate() const {
    if (!(c1 > 0 && e1 > 0 && c2 > 0)) throw DomainError("CycleData: c1, e1, c2 must be positive");
    if (!(e2 >= 0)) throw DomainError("CycleData: e2 must be non-negative");
    if (k < 3) throw DomainError("CycleData: k must be at least 3");
    if (!(v01 > 0 && v01 <= 1 && v02 > 0 && v02 <= 1)) throw DomainError("CycleData: v01, v02 must lie in (0, 1]");
    if (!(beta > 0)) throw DomainError("CycleData: beta must be positive");
    if (!(A > 0)) throw DomainError("CycleData: A must be positive");
  }

  CycleData with_rates(const CycleRates& r) const {
    CycleData d = *this;
    d.c1 = r.c1;
    d.e1 = r.e1;
    d.c2 = r.c2;
    d.e2 = r.e2;
    return d;
  }

  /// Theta = B12 = B21 = 0, as forced by a reflection symmetry.
  CycleData reflection_constrained() const {
    CycleData d = *this;
    d.Theta = 0.0;
    d.B12 = 0.0;
    d.B21 = 0.0;
    return d;
  }
};

struct PolarPoint {
  double rho = 0.0, theta = 0.0;
};

struct CartesianPoint {
  double a = 0.0;  // w on H_in1, v on H_out2
  double q = 0.0;
};

using SectionPoint = std::variant<PolarPoint, CartesianPoint>;

// ---------------------------------------------------------------------------
// Local maps

/// (w, q) on H_in1 -> (v01 w^{c1/e1}, arctan(q / v01)) on H_out1.
inline PolarPoint phi1(const CycleData& cd, double w, double q) {
  if (!(w > 0)) throw LeftDomain("phi1: w must be positive (trajectory on the wrong side of the invariant plane)");
  if (!(std::abs(q) <= 1)) throw LeftDomain("phi1: |q| exceeds the section size");
  return {cd.v01 * std::pow(w, cd.c1 / cd.e1), std::atan(q / cd.v01)};
}

/// Linear passage past xi2: (rho, theta) -> (v02 (rho cos theta)^{c2/e2}, tan theta).
inline CartesianPoint phi2_simple(const CycleData& cd, const PolarPoint& p) {
  const double c = p.rho * std::cos(p.theta);
  if (!(c > 0)) throw LeftDomain("phi2_simple: rho cos(theta) must be positive");
  if (!(cd.e2 > 0)) throw DomainError("phi2_simple: e2 must be positive");
  return {cd.v02 * std::pow(c, cd.c2 / cd.e2), std::tan(p.theta)};
}

enum class ExitAngle { Sine, Tangent };

/// Passage past xi2 through the planar dynamics s' = e2 s + beta conj(s)^2 on
/// the unstable manifold: (rho, theta) -> (v02 e^{-c2 tau}, sin or tan of the
/// exit angle). Angles are reduced to the sector |theta| <= pi/3 about the
/// connection ray theta = 0 using the reflection theta -> -theta.
inline CartesianPoint phi2_d3(const CycleData& cd, const PolarPoint& p, ExitAngle mode = ExitAngle::Sine) {
  if (!(p.rho > 0 && p.rho < 1)) throw LeftDomain("phi2_d3: rho must lie in (0, 1)");
  if (!(std::abs(p.theta) < std::numbers::pi / 3)) throw LeftDomain("phi2_d3: |theta| must be below pi/3");
  if (!(cd.e2 > 0)) throw DomainError("phi2_d3: e2 must be positive");
  const PlanarParams pp = PlanarParams::make(cd.e2, cd.beta);
  TransitOptions opt;
  opt.track_invariants = false;
  const TransitResult tr = transit(pp, p.rho, std::abs(p.theta), opt);
  const double vt = std::copysign(tr.exit_theta, p.theta);
  return {cd.v02 * std::exp(-cd.c2 * tr.tau), mode == ExitAngle::Sine ? std::sin(vt) : std::tan(vt)};
}

// ---------------------------------------------------------------------------
// Global maps

enum class GlobalVariant { Rotation, DihedralAdjusted, Linear, ReflectionConstrained };

struct DihedralChoice {
  int l = 0, s = 0;
  double theta_prime = 0.0;  // Theta + 2 pi s / 3 in (-pi/3, pi/3)
};

/// Exhaustive choice of s in {0,1,2} with Theta' in (-pi/3, pi/3) and of
/// l in {0,1} such that B12 (-1)^l Theta' > 0 (positive w1 after psi2).
inline DihedralChoice dihedral_choice(const CycleData& cd) {
  std::optional<DihedralChoice> out;
  for (int s = 0; s < 3 && !out; ++s) {
    double tp = std::remainder(cd.Theta + 2.0 * std::numbers::pi * s / 3.0, 2.0 * std::numbers::pi);
    if (tp > -std::numbers::pi / 3 && tp < std::numbers::pi / 3) out = DihedralChoice{0, s, tp};
  }
  if (!out) throw DegenerateAngle("dihedral_choice: Theta + 2 pi s / 3 lies on a sector boundary for every s");
  if (out->theta_prime == 0.0 || cd.B12 == 0.0)
    throw DegenerateAngle("dihedral_choice: Theta' = 0 or B12 = 0 leaves the sign of w1 undetermined");
  out->l = cd.B12 * out->theta_prime > 0 ? 0 : 1;
  return *out;
}

inline PolarPoint psi1_rotation(const CycleData& cd, const PolarPoint& p) { return {cd.A * p.rho, p.theta + cd.Theta}; }

/// gamma (A rho, theta + Theta) with gamma = kappa^l rho^s.
inline PolarPoint psi1_dihedral(const CycleData& cd, const DihedralChoice& dc, const PolarPoint& p) {
  const double sgn = dc.l == 0 ? 1.0 : -1.0;
  return {cd.A * p.rho, sgn * (p.theta + dc.theta_prime)};
}

inline CartesianPoint psi2_linear(const CycleData& cd, const CartesianPoint& p) {
  return {cd.B11 * p.a + cd.B12 * p.q, cd.B21 * p.a + cd.B22 * p.q};
}

/// Global map on either section type. Polar points are treated as H_out1
/// points (psi1), Cartesian points as H_out2 points (psi2).
inline SectionPoint psi_global(const CycleData& cd, GlobalVariant variant, const SectionPoint& point) {
  if (const auto* p = std::get_if<PolarPoint>(&point)) {
    switch (variant) {
      case GlobalVariant::Rotation: return psi1_rotation(cd, *p);
      case GlobalVariant::DihedralAdjusted: return psi1_dihedral(cd, dihedral_choice(cd), *p);
      case GlobalVariant::ReflectionConstrained: return psi1_rotation(cd.reflection_constrained(), *p);
      case GlobalVariant::Linear: throw DomainError("psi_global: the linear variant acts on Cartesian points");
    }
  }
  const auto& c = std::get<CartesianPoint>(point);
  switch (variant) {
    case GlobalVariant::Linear: return psi2_linear(cd, c);
    case GlobalVariant::ReflectionConstrained: return psi2_linear(cd.reflection_constrained(), c);
    default: throw DomainError("psi_global: rotation variants act on polar points");
  }
}

// ---------------------------------------------------------------------------
// Regime analyses

struct Theorem1Result {
  double alpha = 0.0;          // min_N |Theta - N pi / k|, N = 0..2k
  double epsilon_bound = 0.0;  // min(tan(alpha/2), v01 tan(alpha/2))
};

inline Theorem1Result theorem1_epsilon(const CycleData& cd, double resonance_tol = 1e-12) {
  cd.validate();
  const double two_pi = 2.0 * std::numbers::pi;
  const double th = cd.Theta - two_pi * std::floor(cd.Theta / two_pi);
  double alpha = std::numeric_limits<double>::infinity();
  for (int N = 0; N <= 2 * cd.k; ++N) alpha = std::min(alpha, std::abs(th - N * std::numbers::pi / cd.k));
  if (alpha <= resonance_tol) throw DegenerateAngle("theorem1_epsilon: Theta is a multiple of pi/k");
  const double t = std::tan(alpha / 2.0);
  return {alpha, std::min(t, cd.v01 * t)};
}

/// Angular distance of theta to the nearest ray N pi / k.
inline double angular_margin(double theta, int k) {
  const double step = std::numbers::pi / k;
  const double r = theta - step * std::round(theta / step);
  return std::abs(r);
}

enum class Regime { Escape, Periodic, Degenerate };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Escape: return "escape";
    case Regime::Periodic: return "periodic";
    case Regime::Degenerate: return "degenerate";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Return maps

enum class ModelKind { CompleteInstability, PeriodicOrbit, Contraction };

struct ReturnMapModel {
  ModelKind kind = ModelKind::PeriodicOrbit;
  CycleData cd;

  /// The instability and periodic-orbit models act on H_out1, the contraction model on H_in2.
  const char* base_section() const { return kind == ModelKind::Contraction ? "H_in2" : "H_out1"; }

  PolarPoint operator()(const PolarPoint& p) const {
    switch (kind) {
      case ModelKind::CompleteInstability: {
        const CartesianPoint out2 = phi2_simple(cd, psi1_rotation(cd, p));
        const CartesianPoint in1 = psi2_linear(cd, out2);
        return phi1(cd, in1.a, in1.q);
      }
      case ModelKind::PeriodicOrbit: {
        const CartesianPoint out2 = phi2_d3(cd, psi1_dihedral(cd, dihedral_choice(cd), p), ExitAngle::Sine);
        const CartesianPoint in1 = psi2_linear(cd, out2);
        return phi1(cd, in1.a, in1.q);
      }
      case ModelKind::Contraction: {
        const CycleData rc = cd.reflection_constrained();
        const CartesianPoint out2 = phi2_d3(rc, p, ExitAngle::Tangent);
        const CartesianPoint in1 = psi2_linear(rc, out2);
        return psi1_rotation(rc, phi1(rc, in1.a, in1.q));
      }
    }
    return p;
  }
};

struct IterationResult {
  std::vector<PolarPoint> points;  // start included
  bool exited = false;
  std::string exit_reason;
};

/// n iterates, or fewer when rho leaves [0, 1], a map leaves its domain, or
/// rho underflows to 0 (not an exit).
inline IterationResult iterate_return_map(const ReturnMapModel& model, const PolarPoint& start, int n) {
  IterationResult res;
  res.points.push_back(start);
  PolarPoint p = start;
  for (int i = 0; i < n; ++i) {
    if (p.rho == 0.0 && i > 0) {
      res.exit_reason = "rho reached 0";
      return res;
    }
    try {
      p = model(p);
    } catch (const DomainError& e) {
      res.exited = true;
      res.exit_reason = e.what();
      return res;
    }
    res.points.push_back(p);
    if (!(p.rho >= 0 && p.rho <= 1)) {
      res.exited = true;
      res.exit_reason = "rho left [0, 1]";
      return res;
    }
  }
  return res;
}

struct Theorem2Result {
  Regime regime = Regime::Degenerate;
  double exponent = 0.0;  // 3 c1 / e1
  double q = 0.0;         // min((3c1 - e1) / (2 e1), 1)
  DihedralChoice choice;
  double theta_tilde = 0.0;  // |Theta'|
  double C1 = 0.0, C2 = 0.0;
  PolarPoint leading;      // (C1 (mu S)^{3c1/e1}, C2 (mu S)^3)
  PolarPoint fixed_point;  // fixed point of the assembled return map
  double residual = 0.0;   // |g(p) - p|
  int iterations = 0;
};

/// Regime and periodic orbit of the return map with e2 = mu.
///
/// With X = rho A beta sin^{1/3}(3 Theta~) + mu S(Theta~), composing the
/// local and global maps gives g ~ (C1 X^{3c1/e1}, C2 X^3) where
/// C1 = v01 (|B12| / (3 beta^3))^{c1/e1} and C2 = sgn B22 / (3 beta^3 v01).
inline Theorem2Result theorem2_analysis(const CycleData& cd_in, double mu) {
  if (!(mu >= 0)) throw DomainError("theorem2_analysis: mu must be non-negative");
  CycleData cd = cd_in;
  cd.e2 = mu;
  cd.validate();
  Theorem2Result r;
  r.exponent = 3.0 * cd.c1 / cd.e1;
  r.q = std::min((3.0 * cd.c1 - cd.e1) / (2.0 * cd.e1), 1.0);
  const double gap = 3.0 * cd.c1 - cd.e1;
  r.regime = std::abs(gap) <= 1e-12 * cd.e1 ? Regime::Degenerate : gap > 0 ? Regime::Periodic : Regime::Escape;
  r.choice = dihedral_choice(cd);
  r.theta_tilde = std::abs(r.choice.theta_prime);
  const double b3 = 3.0 * cd.beta * cd.beta * cd.beta;
  const double sgn = (r.choice.l == 0 ? 1.0 : -1.0) * (r.choice.theta_prime > 0 ? 1.0 : -1.0);
  r.C1 = cd.v01 * std::pow(std::abs(cd.B12) / b3, cd.c1 / cd.e1);
  r.C2 = sgn * cd.B22 / (b3 * cd.v01);
  const double x = mu * s_integral(r.theta_tilde);
  r.leading = {r.C1 * std::pow(x, r.exponent), r.C2 * x * x * x};
  if (r.regime != Regime::Periodic || mu == 0.0) {
    r.fixed_point = mu == 0.0 ? PolarPoint{0.0, 0.0} : r.leading;
    return r;
  }
  const ReturnMapModel g{ModelKind::PeriodicOrbit, cd};
  PolarPoint p = r.leading;
  for (r.iterations = 0; r.iterations < 500; ++r.iterations) {
    const PolarPoint n = g(p);
    const double d = std::hypot(n.rho - p.rho, n.theta - p.theta);
    p = n;
    if (d <= 1e-13 * std::max(std::abs(p.rho), std::abs(p.theta))) break;
  }
  const PolarPoint gp = g(p);
  r.fixed_point = p;
  r.residual = std::hypot(gp.rho - p.rho, gp.theta - p.theta);
  return r;
}

struct Theorem3Result {
  double h = 0.0;  // c1 c2 / (e1 e2)
  bool rho_contracts = false;
  double theta_factor = 0.0;  // B22 ((rho beta cos3t + e2) / (beta cos3t + e2))^3
  bool theta_contracts = false;
};

inline Theorem3Result theorem3_contraction(const CycleData& cd, double rho, double theta) {
  if (!(cd.e1 > 0 && cd.e2 > 0)) throw DomainError("theorem3_contraction: e1, e2 must be positive");
  Theorem3Result r;
  r.h = cd.c1 * cd.c2 / (cd.e1 * cd.e2);
  r.rho_contracts = r.h > 1.0;
  const double c3 = std::cos(3.0 * theta);
  const double f = (rho * cd.beta * c3 + cd.e2) / (cd.beta * c3 + cd.e2);
  r.theta_factor = std::abs(cd.B22) * f * f * f;
  r.theta_contracts = r.theta_factor < 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Cycle data from a vector field

/// Rates, the planar coefficient beta and the base points v01, v02 from the
/// computed cycle; A, Theta and B are taken from `base`.
///
/// v0j is the contracting-direction coordinate, scaled by delta, where the
/// connection arriving at xi_j crosses the sphere of radius delta.
inline CycleData cycle_data_from_spec(const VectorFieldSpec& spec, const CycleGeometry& geo, const CycleData& base,
                                      double delta = 0.1) {
  CycleData cd = base.with_rates(cycle_rates(geo.base));
  auto base_point = [&](int arriving_type, int target_type) {
    for (const Polyline& p : geo.connections) {
      if (p.type != arriving_type || p.to < 0 || geo.equilibrium_type[static_cast<std::size_t>(p.to)] != target_type) continue;
      const Vec4& xi = geo.equilibria[static_cast<std::size_t>(p.to)];
      if ((xi - geo.base[static_cast<std::size_t>(target_type - 1)].position).norm() > 1e-8) continue;
      for (std::size_t i = p.points.size(); i-- > 1;)
        if ((p.points[i - 1] - xi).norm() >= delta) {
          const Vec4 dx = p.points[i - 1] - xi;
          const Vec4 radial = xi.normalized();
          const Vec4 transverse = dx - dx.dot(radial) * radial;
          return std::min(1.0, transverse.norm() / delta);
        }
    }
    throw NoConnection("cycle_data_from_spec: no connection arrives at the base equilibrium");
  };
  cd.v01 = base_point(2, 1);
  cd.v02 = base_point(1, 2);
  // beta: half the second derivative of the field along the departing kappa2
  // direction at xi2, projected on that direction.
  for (const Polyline& p : geo.connections) {
    if (p.type != 2 || (p.points.front() - geo.base[1].position).norm() > 1e-8) continue;
    const Vec4 xi = p.points.front();
    const Vec4 dir = (p.points[1] - xi).normalized();
    const double h = 1e-3;
    auto fw = [&](double t) {
      const Vec4 x = xi + t * dir;
      Vec4 f;
      spec.eval(x.data(), f.data());
      return f.dot(dir);
    };
    cd.beta = std::abs((fw(h) - 2.0 * fw(0.0) + fw(-h)) / (2.0 * h * h));
    break;
  }
  cd.validate();
  return cd;
}

}  // namespace ps
