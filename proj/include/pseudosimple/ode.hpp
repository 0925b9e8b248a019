#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>

#include <boost/numeric/odeint.hpp>

#include "errors.hpp"

namespace ps {

template <std::size_t N>
using State = std::array<double, N>;

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 0.0;  // 0: unbounded
  double max_time = 1000.0;
  double initial_step = 1e-3;
  bool dense = true;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) stepper with its native continuous extension.
///
/// `F` is callable as `void(const State<N>&, State<N>&)`. Each attempted
/// step costs six new evaluations (the first stage is reused), which is how
/// rejections are counted.
template <std::size_t N, class F>
class DenseStepper {
  using Base = boost::numeric::odeint::runge_kutta_dopri5<State<N>>;
  using Dense = typename boost::numeric::odeint::result_of::make_dense_output<Base>::type;

 public:
  DenseStepper(F f, const State<N>& x0, double t0, const IntegratorConfig& cfg)
      : f_(std::move(f)),
        dense_(cfg.max_step > 0 ? boost::numeric::odeint::make_dense_output(cfg.atol, cfg.rtol, cfg.max_step, Base())
                                : boost::numeric::odeint::make_dense_output(cfg.atol, cfg.rtol, Base())) {
    check_finite(x0, t0);
    dense_.initialize(x0, t0, cfg.initial_step);
  }

  /// Advances one accepted step; returns [t_old, t_new].
  std::pair<double, double> step() {
    const std::size_t before = evals_;
    auto sys = [this](const State<N>& x, State<N>& dx, double) {
      ++evals_;
      f_(x, dx);
    };
    std::pair<double, double> span;
    try {
      span = dense_.do_step(sys);
    } catch (const boost::numeric::odeint::step_adjustment_error&) {
      throw IntegrationFailure("step size adjustment failed", dense_.current_time());
    }
    const std::size_t attempts = (evals_ - before) / 6;
    stats_.accepted += 1;
    if (attempts > 1) stats_.rejected += attempts - 1;
    stats_.evaluations = evals_;
    check_finite(dense_.current_state(), span.second);
    if (span.second - span.first < 1e-14 * std::max(1.0, std::abs(span.second)))
      throw IntegrationFailure("step size underflow", span.second);
    return span;
  }

  State<N> state_at(double t) const {
    State<N> x;
    dense_.calc_state(t, x);
    return x;
  }
  const State<N>& state() const { return dense_.current_state(); }
  double time() const { return dense_.current_time(); }
  double previous_time() const { return dense_.previous_time(); }
  const State<N>& previous_state() const { return dense_.previous_state(); }
  const StepStats& stats() const { return stats_; }

 private:
  static void check_finite(const State<N>& x, double t) {
    for (double v : x)
      if (!std::isfinite(v)) throw IntegrationFailure("non-finite state", t);
  }

  F f_;
  Dense dense_;
  std::size_t evals_ = 0;
  StepStats stats_;
};

template <std::size_t N, class F>
DenseStepper<N, F> make_stepper(F f, const State<N>& x0, double t0, const IntegratorConfig& cfg) {
  return DenseStepper<N, F>(std::move(f), x0, t0, cfg);
}

/// Root of g(x(t)) on [t0, t1] by bisection on the dense output, given a sign
/// change between the endpoints.
template <class Stepper, class G>
double locate_event(const Stepper& s, G&& g, double t0, double t1, double ttol = 1e-12) {
  double g0 = g(s.state_at(t0));
  for (int it = 0; it < 200 && t1 - t0 > ttol; ++it) {
    const double tm = 0.5 * (t0 + t1);
    const double gm = g(s.state_at(tm));
    if ((gm <= 0) == (g0 <= 0)) {
      t0 = tm;
      g0 = gm;
    } else {
      t1 = tm;
    }
  }
  return 0.5 * (t0 + t1);
}

}  // namespace ps
