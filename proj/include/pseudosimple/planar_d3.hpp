#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "ode.hpp"
#include "quadrature.hpp"

namespace ps {

// Polar form of z' = alpha z + beta conj(z)^2 in the sector 0 <= theta <= pi/3:
//   r'     = alpha r + beta r^2 cos 3theta
//   theta' = -beta r sin 3theta

struct SectorState {
  double r = 0.0;
  double theta = 0.0;
};

inline State<2> polar_field(const PlanarParams& p, const State<2>& s) {
  return {p.alpha * s[0] + p.beta * s[0] * s[0] * std::cos(3.0 * s[1]), -p.beta * s[0] * std::sin(3.0 * s[1])};
}

/// r sin^{1/3}(3 theta) + (alpha / beta) S(theta).
inline double conserved_quantity(const PlanarParams& p, const SectorState& s) {
  const double th = std::clamp(s.theta, 0.0, std::numbers::pi / 3);
  return s.r * std::cbrt(std::max(0.0, std::sin(3.0 * th))) + p.alpha / p.beta * s_integral(th);
}

/// Time for r' = alpha r + beta r^2 to go from r0 to 1.
inline double transit_time_axis(const PlanarParams& p, double r0) {
  if (!(r0 > 0.0 && r0 < 1.0)) throw DomainError("transit_time_axis: r0 must lie in (0, 1)");
  const double q = p.alpha / p.beta;
  return std::log((r0 + q) / (r0 * (1.0 + q))) / p.alpha;
}

struct TransitResult {
  double tau = 0.0;
  double exit_theta = 0.0;  // vartheta
  double conserved_drift = 0.0;  // max relative drift of the conserved quantity
  double exponential_drift = 0.0;  // max relative drift of e^{-6 alpha t} r^6 sin^2 3theta
  bool theta_monotone = true;
  std::vector<double> t, r, theta;  // filled when recording
};

struct TransitOptions {
  double rtol = 1e-12;
  double atol = 1e-300;
  double max_time = 1e7;
  bool record = false;
  bool track_invariants = true;
};

/// Integrates the polar system from (r0, theta0) until r = 1.
inline TransitResult transit(const PlanarParams& p, double r0, double theta0, const TransitOptions& opt = {}) {
  if (!(r0 > 0.0 && r0 < 1.0)) throw DomainError("transit: r0 must lie in (0, 1)");
  if (!(theta0 >= 0.0 && theta0 <= std::numbers::pi / 3)) throw DomainError("transit: theta0 must lie in [0, pi/3]");
  IntegratorConfig cfg;
  cfg.rtol = opt.rtol;
  cfg.atol = opt.atol;
  cfg.initial_step = 1e-3 / std::max(p.alpha, p.beta * r0);
  auto f = [&p](const State<2>& x, State<2>& dx) { dx = polar_field(p, x); };
  auto st = make_stepper<2>(f, State<2>{r0, theta0}, 0.0, cfg);

  TransitResult res;
  const double h0 = opt.track_invariants ? conserved_quantity(p, {r0, theta0}) : 0.0;
  const double s30 = std::sin(3.0 * theta0);
  const double e0 = std::pow(r0, 6) * s30 * s30;
  auto track = [&](double t, const State<2>& x) {
    if (opt.record) {
      res.t.push_back(t);
      res.r.push_back(x[0]);
      res.theta.push_back(x[1]);
    }
    if (!opt.track_invariants) return;
    if (h0 > 0) res.conserved_drift = std::max(res.conserved_drift, std::abs(conserved_quantity(p, {x[0], x[1]}) - h0) / h0);
    if (e0 > 0) {
      const double s3 = std::sin(3.0 * x[1]);
      // Compare in log form to avoid overflow of e^{6 alpha t}.
      const double le = 6.0 * std::log(x[0]) + 2.0 * std::log(std::abs(s3)) - 6.0 * p.alpha * t;
      res.exponential_drift = std::max(res.exponential_drift, std::abs(std::expm1(le - std::log(e0))));
    }
  };
  track(0.0, {r0, theta0});
  double theta_prev = theta0;
  for (;;) {
    const auto [t0, t1] = st.step();
    const State<2>& x = st.state();
    if (x[1] > theta_prev + 1e-14) res.theta_monotone = false;
    theta_prev = x[1];
    if (x[0] >= 1.0) {
      const double te = locate_event(st, [](const State<2>& y) { return y[0] - 1.0; }, t0, t1, 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t1));
      const State<2> xe = st.state_at(te);
      track(te, {1.0, xe[1]});
      res.tau = te;
      res.exit_theta = xe[1];
      return res;
    }
    track(t1, x);
    if (t1 > opt.max_time) throw IntegrationFailure("transit: r did not reach 1 within max_time", t1);
  }
}

/// Residual of the implicit exit-angle relation
/// sin^{1/3} 3v + (a/b) S(v) = r0 sin^{1/3} 3theta0 + (a/b) S(theta0).
inline double exit_relation_residual(const PlanarParams& p, double r0, double theta0, double vartheta) {
  return conserved_quantity(p, {1.0, vartheta}) - conserved_quantity(p, {r0, theta0});
}

struct Lemma6Report {
  double alpha0 = 0.0;      // eps beta / 4
  bool alpha_admissible = false;  // alpha < alpha0
  bool bound_holds = true;  // r sin(theta) < eps along every sampled trajectory
  double max_value = 0.0;   // largest r sin(theta) observed
  bool turning_points_consistent = true;  // maxima occur at t = 0 or where alpha = 2 beta r cos(theta)
  int trajectories = 0;
};

/// Samples trajectories with r0 < eps, 0 < theta0 < pi/3 and tracks the
/// maximum of r sin(theta) until it is provably decreasing.
inline Lemma6Report lemma6_bound_check(const PlanarParams& p, double eps, int n_r = 6, int n_theta = 6) {
  if (!(eps > 0)) throw DomainError("lemma6_bound_check: eps must be positive");
  Lemma6Report rep;
  rep.alpha0 = eps * p.beta / 4.0;
  rep.alpha_admissible = p.alpha < rep.alpha0;
  IntegratorConfig cfg;
  cfg.rtol = 1e-11;
  cfg.atol = 1e-300;
  for (int i = 1; i <= n_r; ++i)
    for (int j = 1; j <= n_theta; ++j) {
      const double r0 = eps * i / (n_r + 1.0);
      const double th0 = std::numbers::pi / 3 * j / (n_theta + 1.0);
      auto f = [&p](const State<2>& x, State<2>& dx) { dx = polar_field(p, x); };
      auto st = make_stepper<2>(f, State<2>{r0, th0}, 0.0, cfg);
      auto val = [](const State<2>& x) { return x[0] * std::sin(x[1]); };
      // d/dt (r sin(theta)) = r sin(theta) (alpha - 2 beta r cos(theta)).
      auto slope = [&p](const State<2>& x) { return p.alpha - 2.0 * p.beta * x[0] * std::cos(x[1]); };
      // Candidates for the maximum: the start and every + to - zero of the
      // slope; the stepwise maximum must not exceed them.
      double best = val({r0, th0});
      double stepwise = best;
      for (int k = 0; k < 2000000; ++k) {
        const State<2> before = st.state();
        const auto [t0, t1] = st.step();
        const State<2>& x = st.state();
        if (slope(before) > 0 && slope(x) <= 0) {
          const double te = locate_event(st, slope, t0, t1);
          best = std::max(best, val(st.state_at(te)));
        }
        stepwise = std::max(stepwise, val(x));
        // Past the turning point with theta <= pi/6, r sin(theta) only decreases.
        if (slope(x) < 0 && x[1] <= std::numbers::pi / 6 && x[0] > r0) break;
      }
      if (stepwise > best * (1 + 1e-9)) rep.turning_points_consistent = false;
      best = std::max(best, stepwise);
      ++rep.trajectories;
      rep.max_value = std::max(rep.max_value, best);
      if (!(best < eps)) rep.bound_holds = false;
    }
  return rep;
}

struct Lemma8Report {
  double sin3_exit = 0.0, sin3_bound = 0.0;
  bool strict = false;
  double exp_alpha_tau = 0.0, exp_alpha_tau_bound = 0.0;
  bool tau_strict = false;
  double tau = 0.0, exit_theta = 0.0;
};

/// sin 3v < ((r0 b cos3t0 + a)/(b cos3t0 + a))^3 sin 3t0 and
/// e^{a tau} < (r0 b cos3t0 + a)/(r0 (b cos3t0 + a)) on one trajectory.
inline Lemma8Report lemma8_bound_check(const PlanarParams& p, double r0, double theta0) {
  if (!(theta0 > 0.0 && theta0 < std::numbers::pi / 6)) throw DomainError("lemma8_bound_check: theta0 must lie in (0, pi/6)");
  TransitOptions opt;
  opt.track_invariants = false;
  const TransitResult tr = transit(p, r0, theta0, opt);
  Lemma8Report rep;
  rep.tau = tr.tau;
  rep.exit_theta = tr.exit_theta;
  const double c3 = std::cos(3.0 * theta0);
  const double ratio = (r0 * p.beta * c3 + p.alpha) / (p.beta * c3 + p.alpha);
  rep.sin3_exit = std::sin(3.0 * tr.exit_theta);
  rep.sin3_bound = ratio * ratio * ratio * std::sin(3.0 * theta0);
  rep.strict = rep.sin3_exit < rep.sin3_bound;
  rep.exp_alpha_tau = std::exp(p.alpha * tr.tau);
  rep.exp_alpha_tau_bound = (r0 * p.beta * c3 + p.alpha) / (r0 * (p.beta * c3 + p.alpha));
  rep.tau_strict = rep.exp_alpha_tau < rep.exp_alpha_tau_bound;
  return rep;
}

/// log(e^{-C tau(r0, theta0)} / vartheta(r0, theta0)); logarithmic because
/// e^{-C tau} underflows for small alpha.
inline double log_exit_ratio(const PlanarParams& p, double C, double r0, double theta0) {
  TransitOptions opt;
  opt.track_invariants = false;
  const TransitResult tr = transit(p, r0, theta0, opt);
  return -C * tr.tau - std::log(tr.exit_theta);
}

}  // namespace ps
