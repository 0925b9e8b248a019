#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "errors.hpp"

namespace ps {

namespace detail {

// I(U) = int_0^U sin^{-2/3}(u) du for 0 <= U <= pi/2, via u = v^3, which
// turns the endpoint singularity into the smooth 3 (v^3 / sin v^3)^{2/3}.
inline double sin_m23_integral_half(double U) {
  if (U <= 0) return 0.0;
  auto f = [](double v) {
    const double u = v * v * v;
    if (u < 1e-300) return 3.0;
    return 3.0 * std::cbrt(std::pow(u / std::sin(u), 2.0));
  };
  const double vmax = std::cbrt(U);
  constexpr int kPanels = 4;
  double sum = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double a = vmax * p / kPanels, b = vmax * (p + 1) / kPanels;
    sum += boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
  }
  return sum;
}

// I(U) on [0, pi], using the symmetry sin(pi - u) = sin(u).
inline double sin_m23_integral(double U) {
  constexpr double half = std::numbers::pi / 2;
  if (U <= half) return sin_m23_integral_half(U);
  return 2.0 * sin_m23_integral_half(half) - sin_m23_integral_half(std::numbers::pi - U);
}

}  // namespace detail

/// S(theta) = int_0^theta sin^{-2/3}(3t) dt on [0, pi/3].
inline double s_integral(double theta) {
  constexpr double top = std::numbers::pi / 3;
  if (!(theta >= 0.0 && theta <= top * (1 + 1e-15))) throw DomainError("s_integral: theta outside [0, pi/3]");
  return detail::sin_m23_integral(std::min(3.0 * theta, std::numbers::pi)) / 3.0;
}

}  // namespace ps
