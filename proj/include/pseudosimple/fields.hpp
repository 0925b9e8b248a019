#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "group.hpp"
#include "isotropy.hpp"

namespace ps {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Coefficient records

/// Coefficients of the D3-equivariant cubic. a5 = -a3 - a4 and a7 = a8 = -1
/// are enforced; the tilde variant additionally forces a9 = a10, b2 = b3.
class CoeffsD3 {
 public:
  std::array<double, 10> a{};  // a[0] = a1, ..., a[9] = a10
  std::array<double, 6> b{};   // b[0] = b1, ..., b[5] = b6

  static CoeffsD3 make(const std::array<double, 10>& a, const std::array<double, 6>& b, bool tilde = false) {
    CoeffsD3 c;
    c.a = a;
    c.b = b;
    c.tilde_ = tilde;
    auto bad = [](const std::string& what) { throw DomainError("CoeffsD3: " + what); };
    if (std::abs(a[2] + a[3] + a[4]) > 1e-12) bad("a3 + a4 + a5 must vanish");
    if (a[6] != -1.0 || a[7] != -1.0) bad("a7 = a8 = -1 required");
    if (tilde && (a[8] != a[9] || b[1] != b[2])) bad("tilde variant requires a9 = a10 and b2 = b3");
    return c;
  }

  /// Coefficient table with a stable periodic orbit near the cycle.
  static CoeffsD3 reference_periodic() {
    return make({0.25, 0.05, 0.3, -0.05, -0.25, 0.6, -1, -1, 0.1, 0.15}, {0.2, -0.1, -0.09, -0.1, -1, -1});
  }
  /// Same table with a9 = a10 = 0.1 and b2 = b3 = -0.6 (sigma-symmetric).
  static CoeffsD3 reference_tilde() {
    return make({0.25, 0.05, 0.3, -0.05, -0.25, 0.6, -1, -1, 0.1, 0.1}, {0.2, -0.6, -0.6, -0.1, -1, -1}, true);
  }

  bool tilde() const { return tilde_; }
  double alpha() const { return a[0] + a[1]; }
  double alpha_prime() const { return a[0] - a[1]; }

 private:
  bool tilde_ = false;
};

/// Coefficients of the GL(2,3)-equivariant cubic normal form.
struct CoeffsGL {
  double mu = 1.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0;

  cplx A() const { return {-3.0 * std::numbers::sqrt3 * e, -c / 2.0}; }
  cplx B() const { return {d, e}; }
  cplx C() const { return {-3.0 * d + std::numbers::sqrt3 * c, 3.0 * e}; }
  cplx D() const { return std::numbers::sqrt3 * cplx(-e, 2.0 * d - std::numbers::sqrt3 / 2.0 * c); }

  /// Parenthesized cubic coefficients of the axis-restricted dynamics
  /// r' = r (mu + K r^2) on L1 and L2.
  double K1() const {
    const double s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3;
    return 2 * b + 2 * s2 * c - 8 * s2 / s3 * d - 4 / s3 * e;
  }
  double K2() const {
    const double s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3;
    return 2 * b - 2 * s2 * c + 8 * s2 / s3 * d - 4 / s3 * e;
  }
};

/// One-parameter-pair family of GL coefficients with d = 1, mu = 1.
struct GLParametrization {
  double h1 = 0.8, h2 = 0.001;

  CoeffsGL coeffs() const {
    if (!(h1 > -1.0 && h1 < 1.0)) throw DomainError("GLParametrization: h1 must lie in (-1, 1)");
    if (!(h2 > 0.0)) throw DomainError("GLParametrization: h2 must be positive");
    const double s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3, s6 = std::sqrt(6.0);
    CoeffsGL k;
    k.mu = 1.0;
    k.d = 1.0;
    k.e = (k.d - h1) / (2.0 * s2);
    k.c = (10.0 * s3 * k.d + 2.0 * s6 * k.e) / 9.0 + h2;
    k.b = (3.0 * s2 * k.c - 4.0 * s6 * k.d + 2.0 * s3 * k.e) / 3.0 - 1.0;
    return k;
  }
};

/// z' = alpha z + beta conj(z)^2.
struct PlanarParams {
  double alpha = 0.1, beta = 1.0;
  static PlanarParams make(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("PlanarParams: alpha and beta must be positive");
    return {alpha, beta};
  }
};

// ---------------------------------------------------------------------------
// Vector field specification

enum class Family { D3Cubic, D3TildeCubic, GL23Cubic, PlanarD3 };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::D3Cubic: return "D3Cubic";
    case Family::D3TildeCubic: return "D3TildeCubic";
    case Family::GL23Cubic: return "GL23Cubic";
    case Family::PlanarD3: return "PlanarD3";
  }
  return "?";
}

namespace detail {
inline std::shared_ptr<const GroupTable> cached_group(Family f) {
  static const auto d3 = std::make_shared<const GroupTable>(groups::gamma_d3());
  static const auto tilde = std::make_shared<const GroupTable>(groups::gamma_tilde());
  static const auto gl = std::make_shared<const GroupTable>(groups::gl23());
  static const auto planar = std::make_shared<const GroupTable>(groups::planar_d3());
  switch (f) {
    case Family::D3Cubic: return d3;
    case Family::D3TildeCubic: return tilde;
    case Family::GL23Cubic: return gl;
    case Family::PlanarD3: return planar;
  }
  return d3;
}
}  // namespace detail

class VectorFieldSpec {
 public:
  using Coeffs = std::variant<CoeffsD3, CoeffsGL, PlanarParams>;

  static VectorFieldSpec d3(const CoeffsD3& c) {
    const Family f = c.tilde() ? Family::D3TildeCubic : Family::D3Cubic;
    return VectorFieldSpec(f, c, detail::cached_group(f));
  }
  static VectorFieldSpec gl23(const CoeffsGL& c) {
    return VectorFieldSpec(Family::GL23Cubic, c, detail::cached_group(Family::GL23Cubic));
  }
  static VectorFieldSpec gl23(const GLParametrization& p) { return gl23(p.coeffs()); }
  static VectorFieldSpec planar(const PlanarParams& p) {
    return VectorFieldSpec(Family::PlanarD3, p, detail::cached_group(Family::PlanarD3));
  }

  /// Same field with a different attached group (used to probe equivariance).
  VectorFieldSpec with_group(std::shared_ptr<const GroupTable> g) const {
    VectorFieldSpec s = *this;
    s.group_ = std::move(g);
    return s;
  }

  Family family() const { return family_; }
  int dim() const { return family_ == Family::PlanarD3 ? 2 : 4; }
  const Coeffs& coeffs() const { return coeffs_; }
  const CoeffsD3& d3_coeffs() const { return std::get<CoeffsD3>(coeffs_); }
  const CoeffsGL& gl_coeffs() const { return std::get<CoeffsGL>(coeffs_); }
  const PlanarParams& planar_params() const { return std::get<PlanarParams>(coeffs_); }
  const GroupTable& group() const { return *group_; }
  std::shared_ptr<const GroupTable> group_ptr() const { return group_; }

  /// Raw evaluation, out = f(x); x and out have dim() entries.
  void eval(const double* x, double* out) const {
    switch (family_) {
      case Family::D3Cubic:
      case Family::D3TildeCubic: eval_d3(x, out); break;
      case Family::GL23Cubic: eval_gl(x, out); break;
      case Family::PlanarD3: eval_planar(x, out); break;
    }
  }

  /// Analytic Jacobian, row-major into a dim() x dim() matrix.
  Eigen::MatrixXd jacobian(const double* x) const {
    Eigen::MatrixXd j(dim(), dim());
    switch (family_) {
      case Family::D3Cubic:
      case Family::D3TildeCubic: jac_d3(x, j); break;
      case Family::GL23Cubic: jac_gl(x, j); break;
      case Family::PlanarD3: jac_planar(x, j); break;
    }
    return j;
  }

 private:
  VectorFieldSpec(Family f, Coeffs c, std::shared_ptr<const GroupTable> g)
      : family_(f), coeffs_(std::move(c)), group_(std::move(g)) {
    if (family_ == Family::GL23Cubic) {
      const auto& k = std::get<CoeffsGL>(coeffs_);
      gA_ = k.A();
      gB_ = k.B();
      gC_ = k.C();
      gD_ = k.D();
    }
  }

  // Real 2x2 block of d f / d(x, y) from Wirtinger derivatives P = df/dz,
  // Q = df/dzbar.
  static void put_block(Eigen::MatrixXd& j, int row, int col, cplx p, cplx q) {
    j(row, col) = (p + q).real();
    j(row, col + 1) = -(p - q).imag();
    j(row + 1, col) = (p + q).imag();
    j(row + 1, col + 1) = (p - q).real();
  }

  void eval_d3(const double* x, double* out) const {
    const auto& k = std::get<CoeffsD3>(coeffs_);
    const auto& a = k.a;
    const auto& b = k.b;
    const cplx z1(x[0], x[1]), z2(x[2], x[3]);
    const cplx c1 = std::conj(z1), c2 = std::conj(z2);
    const double n1 = std::norm(z1), n2 = std::norm(z2);
    const cplx f1 = a[0] * z1 + a[1] * c1 + a[2] * z1 * z1 + a[3] * c1 * c1 + a[4] * n1 + a[5] * n2 +
                    a[6] * z1 * n1 + a[7] * z1 * n2 + a[8] * z2 * z2 * z2 + a[9] * c2 * c2 * c2;
    const cplx f2 = b[0] * z2 + b[1] * z1 * z2 + b[2] * c1 * z2 + b[3] * c2 * c2 + b[4] * z2 * n1 + b[5] * z2 * n2;
    out[0] = f1.real();
    out[1] = f1.imag();
    out[2] = f2.real();
    out[3] = f2.imag();
  }

  void jac_d3(const double* x, Eigen::MatrixXd& j) const {
    const auto& k = std::get<CoeffsD3>(coeffs_);
    const auto& a = k.a;
    const auto& b = k.b;
    const cplx z1(x[0], x[1]), z2(x[2], x[3]);
    const cplx c1 = std::conj(z1), c2 = std::conj(z2);
    const double n1 = std::norm(z1), n2 = std::norm(z2);
    put_block(j, 0, 0, a[0] + 2.0 * a[2] * z1 + a[4] * c1 + 2.0 * a[6] * n1 + a[7] * n2,
              a[1] + 2.0 * a[3] * c1 + a[4] * z1 + a[6] * z1 * z1);
    put_block(j, 0, 2, a[5] * c2 + a[7] * z1 * c2 + 3.0 * a[8] * z2 * z2, a[5] * z2 + a[7] * z1 * z2 + 3.0 * a[9] * c2 * c2);
    put_block(j, 2, 0, b[1] * z2 + b[4] * z2 * c1, b[2] * z2 + b[4] * z2 * z1);
    put_block(j, 2, 2, b[0] + b[1] * z1 + b[2] * c1 + b[4] * n1 + 2.0 * b[5] * n2, 2.0 * b[3] * c2 + b[5] * z2 * z2);
  }

  void eval_gl(const double* x, double* out) const {
    const auto& k = std::get<CoeffsGL>(coeffs_);
    const cplx z1(x[0], x[1]), z2(x[2], x[3]);
    const cplx c1 = std::conj(z1), c2 = std::conj(z2);
    const double n1 = std::norm(z1), n2 = std::norm(z2);
    const double g = k.mu + k.b * (n1 + n2);
    const cplx ic(0.0, k.c);
    const cplx f1 = g * z1 + gA_ * z1 * n1 + ic * z1 * n2 + gB_ * z2 * z2 * z2 + gC_ * c1 * c1 * z2 + gD_ * c1 * c2 * c2;
    const cplx f2 = g * z2 + gA_ * z2 * n2 + ic * n1 * z2 - gB_ * z1 * z1 * z1 - gC_ * z1 * c2 * c2 + gD_ * c1 * c1 * c2;
    out[0] = f1.real();
    out[1] = f1.imag();
    out[2] = f2.real();
    out[3] = f2.imag();
  }

  void jac_gl(const double* x, Eigen::MatrixXd& j) const {
    const auto& k = std::get<CoeffsGL>(coeffs_);
    const cplx z1(x[0], x[1]), z2(x[2], x[3]);
    const cplx c1 = std::conj(z1), c2 = std::conj(z2);
    const double n1 = std::norm(z1), n2 = std::norm(z2);
    const double g = k.mu + k.b * (n1 + n2);
    const double bb = k.b;
    const cplx ic(0.0, k.c);
    put_block(j, 0, 0, g + bb * n1 + 2.0 * gA_ * n1 + ic * n2, bb * z1 * z1 + gA_ * z1 * z1 + 2.0 * gC_ * c1 * z2 + gD_ * c2 * c2);
    put_block(j, 0, 2, bb * c2 * z1 + ic * z1 * c2 + 3.0 * gB_ * z2 * z2 + gC_ * c1 * c1,
              bb * z2 * z1 + ic * z1 * z2 + 2.0 * gD_ * c1 * c2);
    put_block(j, 2, 0, bb * c1 * z2 + ic * c1 * z2 - 3.0 * gB_ * z1 * z1 - gC_ * c2 * c2,
              bb * z1 * z2 + ic * z1 * z2 + 2.0 * gD_ * c1 * c2);
    put_block(j, 2, 2, g + bb * n2 + 2.0 * gA_ * n2 + ic * n1, bb * z2 * z2 + gA_ * z2 * z2 - 2.0 * gC_ * z1 * c2 + gD_ * c1 * c1);
  }

  void eval_planar(const double* x, double* out) const {
    const auto& p = std::get<PlanarParams>(coeffs_);
    const cplx z(x[0], x[1]);
    const cplx f = p.alpha * z + p.beta * std::conj(z) * std::conj(z);
    out[0] = f.real();
    out[1] = f.imag();
  }

  void jac_planar(const double* x, Eigen::MatrixXd& j) const {
    const auto& p = std::get<PlanarParams>(coeffs_);
    const cplx z(x[0], x[1]);
    put_block(j, 0, 0, p.alpha, 2.0 * p.beta * std::conj(z));
  }

  Family family_;
  Coeffs coeffs_;
  std::shared_ptr<const GroupTable> group_;
  cplx gA_, gB_, gC_, gD_;
};

inline Eigen::VectorXd eval_field(const VectorFieldSpec& spec, const Eigen::VectorXd& x) {
  if (x.size() != spec.dim())
    throw DomainError(std::string("eval_field: dimension mismatch for ") + family_name(spec.family()));
  Eigen::VectorXd out(spec.dim());
  spec.eval(x.data(), out.data());
  return out;
}

inline Eigen::MatrixXd jacobian(const VectorFieldSpec& spec, const Eigen::VectorXd& x) {
  if (x.size() != spec.dim())
    throw DomainError(std::string("jacobian: dimension mismatch for ") + family_name(spec.family()));
  return spec.jacobian(x.data());
}

/// Group element restricted to the field's phase space (the planar family
/// uses the upper-left 2x2 block).
inline Eigen::MatrixXd acting_matrix(const VectorFieldSpec& spec, const Orthogonal4& g) {
  return g.matrix().topLeftCorner(spec.dim(), spec.dim());
}

/// max over group elements and random points of |f(gx) - g f(x)| / (1 + |f(x)|).
inline double verify_equivariance(const VectorFieldSpec& spec, int samples, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) x[i] = nd(rng);
    const Eigen::VectorXd fx = eval_field(spec, x);
    for (const auto& g : spec.group().elements()) {
      const Eigen::MatrixXd m = acting_matrix(spec, g);
      const double r = (eval_field(spec, m * x) - m * fx).norm() / (1.0 + fx.norm());
      worst = std::max(worst, r);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Equilibria and spectra

enum class EigenRole { Radial, Contracting, Expanding, Transverse };

inline const char* role_name(EigenRole r) {
  switch (r) {
    case EigenRole::Radial: return "radial";
    case EigenRole::Contracting: return "contracting";
    case EigenRole::Expanding: return "expanding";
    case EigenRole::Transverse: return "transverse";
  }
  return "?";
}

struct EigenEntry {
  cplx value;
  int multiplicity = 1;
  std::vector<Vec4> eigenspace;  // real basis of the (geometric) eigenspace
  EigenRole role = EigenRole::Transverse;
};

struct EquilibriumReport {
  std::string label;  // "xi1" or "xi2"
  Vec4 position = Vec4::Zero();
  Vec4 axis = Vec4::Zero();  // unit direction of the symmetry axis
  double radial = 0.0;
  std::vector<EigenEntry> eigen;

  const EigenEntry* find(EigenRole r) const {
    for (const auto& e : eigen)
      if (e.role == r) return &e;
    return nullptr;
  }
};

/// Eigenvalues of a 4x4 matrix grouped into clusters with geometric
/// eigenspaces; roles are assigned from the axis direction and signs.
inline std::vector<EigenEntry> classify_spectrum(const Mat4& j, const Vec4& axis) {
  Eigen::EigenSolver<Mat4> es(j);
  std::vector<cplx> vals(es.eigenvalues().data(), es.eigenvalues().data() + 4);
  std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  const double scale = std::max(1.0, j.norm());
  std::vector<EigenEntry> out;
  for (cplx v : vals) {
    auto it = std::find_if(out.begin(), out.end(), [&](const EigenEntry& e) { return std::abs(e.value - v) <= 1e-7 * scale; });
    if (it != out.end()) {
      // Running mean keeps clustered values symmetric.
      it->value = (it->value * double(it->multiplicity) + v) / double(it->multiplicity + 1);
      ++it->multiplicity;
    } else {
      out.push_back({v, 1, {}, EigenRole::Transverse});
    }
  }
  for (auto& e : out) {
    if (std::abs(e.value.imag()) > 1e-9 * scale) continue;
    const Mat4 m = j - e.value.real() * Mat4::Identity();
    Eigen::JacobiSVD<Mat4> svd(m, Eigen::ComputeFullV);
    for (int i = 3; i >= 0; --i)
      if (svd.singularValues()[i] <= 1e-6 * scale)
        e.eigenspace.push_back(LinearSubspace::canonical_sign(svd.matrixV().col(i)));
  }
  const double an = axis.norm();
  for (auto& e : out) {
    const bool along_axis = an > 0 && e.eigenspace.size() == 1 && std::abs(e.eigenspace[0].dot(axis) / an) > 1 - 1e-6;
    if (along_axis)
      e.role = EigenRole::Radial;
    else if (e.value.real() < 0)
      e.role = EigenRole::Contracting;
    else if (e.value.real() > 0)
      e.role = EigenRole::Expanding;
  }
  return out;
}

namespace detail {

// Newton iteration on g(s) = <f(s u), u> along a flow-invariant axis u.
inline double polish_on_axis(const VectorFieldSpec& spec, const Vec4& u, double s) {
  for (int it = 0; it < 50; ++it) {
    const Vec4 x = s * u;
    Vec4 f;
    spec.eval(x.data(), f.data());
    const double g = f.dot(u);
    const Mat4 j = spec.jacobian(x.data());
    const double dg = u.dot(j * u);
    if (dg == 0.0) break;
    const double step = g / dg;
    s -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s))) break;
  }
  return s;
}

inline EquilibriumReport make_report(const VectorFieldSpec& spec, std::string label, const Vec4& u, double s0) {
  EquilibriumReport r;
  r.label = std::move(label);
  r.axis = u;
  const double s = polish_on_axis(spec, u, s0);
  r.position = s * u;
  const Mat4 j = spec.jacobian(r.position.data());
  r.eigen = classify_spectrum(j, u);
  if (const auto* e = r.find(EigenRole::Radial)) r.radial = e->value.real();
  return r;
}

}  // namespace detail

/// Axis directions used for the GL family: xi1 on L1(0,0), xi2 on L2(0,0).
inline Vec4 gl_axis(int which) { return (which == 1 ? gl23_axis_l1(0, 0) : gl23_axis_l2(0, 0))[0]; }

/// Equilibria xi1, xi2 of the 4-d families, located in closed form and
/// polished by Newton on the axis dynamics.
inline std::vector<EquilibriumReport> equilibria_on_axes(const VectorFieldSpec& spec) {
  std::vector<EquilibriumReport> out;
  switch (spec.family()) {
    case Family::D3Cubic:
    case Family::D3TildeCubic: {
      const double al = spec.d3_coeffs().alpha();
      if (!(al > 0)) throw NoEquilibrium("no equilibrium on L: alpha = a1 + a2 = " + std::to_string(al) + " <= 0");
      const Vec4 u = Vec4::Unit(0);
      out.push_back(detail::make_report(spec, "xi1", u, std::sqrt(al)));
      out.push_back(detail::make_report(spec, "xi2", u, -std::sqrt(al)));
      break;
    }
    case Family::GL23Cubic: {
      const auto& k = spec.gl_coeffs();
      if (!(k.K1() < 0))
        throw NoEquilibrium("no equilibrium on L1: 2b + 2sqrt2 c - 8sqrt2/sqrt3 d - 4/sqrt3 e = " + std::to_string(k.K1()) + " >= 0");
      if (!(k.K2() < 0))
        throw NoEquilibrium("no equilibrium on L2: 2b - 2sqrt2 c + 8sqrt2/sqrt3 d - 4/sqrt3 e = " + std::to_string(k.K2()) + " >= 0");
      // |x|^2 = 2 r^2 with r^2 = -mu / K.
      out.push_back(detail::make_report(spec, "xi1", gl_axis(1), std::sqrt(-2.0 * k.mu / k.K1())));
      out.push_back(detail::make_report(spec, "xi2", gl_axis(2), std::sqrt(-2.0 * k.mu / k.K2())));
      break;
    }
    case Family::PlanarD3:
      throw DomainError("equilibria_on_axes: the planar family has no off-origin axis equilibria");
  }
  return out;
}

struct AnalyticEigenvalue {
  std::string name;
  double value;
  int multiplicity;
};

/// Closed-form eigenvalues at xi1 (which = 1) or xi2 (which = 2).
inline std::vector<AnalyticEigenvalue> analytic_eigenvalues(const VectorFieldSpec& spec, int which) {
  if (which != 1 && which != 2) throw DomainError("analytic_eigenvalues: which must be 1 or 2");
  switch (spec.family()) {
    case Family::D3Cubic:
    case Family::D3TildeCubic: {
      const auto& k = spec.d3_coeffs();
      const double al = k.alpha();
      if (!(al > 0)) throw NoEquilibrium("no equilibrium on L: alpha <= 0");
      const double sa = (which == 1 ? 1.0 : -1.0) * std::sqrt(al);
      const double y1 = k.a[0] - k.a[1] + 2.0 * (k.a[2] - k.a[3]) * sa - al;
      const double z2 = k.b[0] + (k.b[1] + k.b[2]) * sa + k.b[4] * al;
      return {{"radial", -2.0 * al, 1}, {"y1", y1, 1}, {"z2", z2, 2}};
    }
    case Family::GL23Cubic: {
      const auto& k = spec.gl_coeffs();
      const double s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3, s6 = std::sqrt(6.0);
      const double K = which == 1 ? k.K1() : k.K2();
      if (!(K < 0)) throw NoEquilibrium("no equilibrium on the axis");
      const double r2 = -k.mu / K;
      double mlt, sgl;
      if (which == 1) {
        mlt = 2 * s2 * r2 / 3 * (-9 * k.c + 10 * s3 * k.d - 2 * s6 * k.e);
        sgl = r2 * (-32 / s3 * k.e + 8 * s2 / s3 * k.d);
      } else {
        mlt = 2 * s2 * r2 / 3 * (9 * k.c - 10 * s3 * k.d - 2 * s6 * k.e);
        sgl = r2 * (-32 / s3 * k.e - 8 * s2 / s3 * k.d);
      }
      return {{"radial", -2.0 * k.mu, 1}, {"single", sgl, 1}, {"double", mlt, 2}};
    }
    case Family::PlanarD3: break;
  }
  throw DomainError("analytic_eigenvalues: not defined for the planar family");
}

/// Rates (c1, e1, c2, e2) of a two-equilibrium cycle read from the spectra:
/// contracting and expanding magnitudes at xi1 and xi2.
struct CycleRates {
  double c1 = 0, e1 = 0, c2 = 0, e2 = 0;
};

inline CycleRates cycle_rates(const std::vector<EquilibriumReport>& eq) {
  auto get = [](const EquilibriumReport& r, EigenRole role) {
    const auto* e = r.find(role);
    if (!e) throw DomainError("cycle_rates: " + r.label + " has no " + role_name(role) + " eigenvalue");
    return std::abs(e->value.real());
  };
  if (eq.size() < 2) throw DomainError("cycle_rates: two equilibria required");
  return {get(eq[0], EigenRole::Contracting), get(eq[0], EigenRole::Expanding), get(eq[1], EigenRole::Contracting),
          get(eq[1], EigenRole::Expanding)};
}

// ---------------------------------------------------------------------------
// Existence predicates

struct Predicate {
  std::string name;      // human-readable inequality "lhs op rhs"
  std::string relation;  // "<" or ">"
  double lhs = 0, rhs = 0;
  bool holds = false;
};

inline Predicate make_predicate(std::string name, double lhs, const std::string& rel, double rhs) {
  const bool ok = rel == "<" ? lhs < rhs : lhs > rhs;
  return {std::move(name), rel, lhs, rhs, ok};
}

inline std::vector<Predicate> existence_report(const VectorFieldSpec& spec) {
  std::vector<Predicate> out;
  switch (spec.family()) {
    case Family::D3Cubic:
    case Family::D3TildeCubic: {
      const auto& k = spec.d3_coeffs();
      const double al = k.alpha(), alp = k.alpha_prime();
      const double a34m = k.a[2] - k.a[3];
      out.push_back(make_predicate("alpha = a1 + a2 > 0", al, ">", 0.0));
      out.push_back(make_predicate("P1 connection: a3 + a4 > 0", k.a[2] + k.a[3], ">", 0.0));
      out.push_back(make_predicate("P1 connection: a3 - a4 > 0", a34m, ">", 0.0));
      const double root = a34m * a34m + alp;
      out.push_back(make_predicate("P1 connection: a3 - a4 + ((a3 - a4)^2 + alpha')^(1/2) < alpha^(1/2)",
                                   root >= 0 ? a34m + std::sqrt(root) : std::nan(""), "<",
                                   al > 0 ? std::sqrt(al) : std::nan("")));
      if (al > 0) {
        try {
          const CycleRates r = cycle_rates(equilibria_on_axes(spec));
          out.push_back(make_predicate("periodic-orbit regime: 3 c1 > e1", 3 * r.c1, ">", r.e1));
        } catch (const DomainError&) {
          out.push_back({"periodic-orbit regime: 3 c1 > e1 (spectrum lacks a saddle structure)", ">", 0, 0, false});
        }
      }
      break;
    }
    case Family::GL23Cubic: {
      const auto& k = spec.gl_coeffs();
      const double s2 = std::numbers::sqrt2, s3 = std::numbers::sqrt3, s6 = std::sqrt(6.0);
      out.push_back(make_predicate("xi1 exists: 2b + 2sqrt2 c - 8sqrt2/sqrt3 d - 4/sqrt3 e < 0", k.K1(), "<", 0.0));
      out.push_back(make_predicate("xi2 exists: 2b - 2sqrt2 c + 8sqrt2/sqrt3 d - 4/sqrt3 e < 0", k.K2(), "<", 0.0));
      if (k.K1() < 0 && k.K2() < 0) {
        const auto e1 = analytic_eigenvalues(spec, 1), e2 = analytic_eigenvalues(spec, 2);
        out.push_back(make_predicate("lambda1_sgl > 0", e1[1].value, ">", 0.0));
        out.push_back(make_predicate("lambda2_sgl < 0", e2[1].value, "<", 0.0));
        out.push_back(make_predicate("lambda1_mlt < 0", e1[2].value, "<", 0.0));
        out.push_back(make_predicate("lambda2_mlt > 0", e2[2].value, ">", 0.0));
      }
      out.push_back(make_predicate("-d < 2sqrt2 e", -k.d, "<", 2 * s2 * k.e));
      out.push_back(make_predicate("2sqrt2 e < d", 2 * s2 * k.e, "<", k.d));
      out.push_back(make_predicate("c > max(10sqrt3 d + 2sqrt6 e, 10sqrt3 d - 2sqrt6 e) / 9", k.c, ">",
                                   std::max(10 * s3 * k.d + 2 * s6 * k.e, 10 * s3 * k.d - 2 * s6 * k.e) / 9));
      out.push_back(make_predicate("b < min(3sqrt2 c - 4sqrt6 d + 2sqrt3 e, -3sqrt2 c + 4sqrt6 d + 2sqrt3 e) / 3", k.b,
                                   "<",
                                   std::min(3 * s2 * k.c - 4 * s6 * k.d + 2 * s3 * k.e,
                                            -3 * s2 * k.c + 4 * s6 * k.d + 2 * s3 * k.e) /
                                       3));
      break;
    }
    case Family::PlanarD3: {
      const auto& p = spec.planar_params();
      out.push_back(make_predicate("alpha > 0", p.alpha, ">", 0.0));
      out.push_back(make_predicate("beta > 0", p.beta, ">", 0.0));
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Restriction to invariant subspaces

struct Monomial {
  std::vector<int> exponents;  // one entry per reduced coordinate
  std::vector<double> coeff;   // one entry per reduced equation
};

/// Field restricted to a flow-invariant subspace, in the coordinates of the
/// subspace basis: y' = B^T f(B y).
class ReducedField {
 public:
  ReducedField(VectorFieldSpec spec, LinearSubspace sub) : spec_(std::move(spec)), sub_(std::move(sub)) {}

  int dim() const { return sub_.dim(); }
  const LinearSubspace& subspace() const { return sub_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd x = embed(y);
    return sub_.basis_matrix().transpose() * eval_field(spec_, x);
  }
  Eigen::VectorXd embed(const Eigen::VectorXd& y) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec_.dim());
    for (int i = 0; i < dim(); ++i) x += y[i] * sub_[i].head(spec_.dim());
    return x;
  }

  /// Monomial coefficients of the reduced cubic polynomial (|c| < 1e-11 dropped).
  std::vector<Monomial> monomials() const {
    const int k = dim();
    std::vector<std::vector<int>> exps;
    std::vector<int> e(static_cast<std::size_t>(k), 0);
    enumerate(exps, e, 0, 3);
    const int n = static_cast<int>(exps.size());
    const int m = 3 * n;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Eigen::MatrixXd v(m, n), rhs(m, k);
    for (int row = 0; row < m; ++row) {
      Eigen::VectorXd y(k);
      for (int i = 0; i < k; ++i) y[i] = ud(rng);
      for (int c = 0; c < n; ++c) {
        double p = 1;
        for (int i = 0; i < k; ++i) p *= std::pow(y[i], exps[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]);
        v(row, c) = p;
      }
      rhs.row(row) = (*this)(y).transpose();
    }
    const Eigen::MatrixXd coef = v.colPivHouseholderQr().solve(rhs);
    std::vector<Monomial> out;
    for (int c = 0; c < n; ++c) {
      Monomial mo{exps[static_cast<std::size_t>(c)], std::vector<double>(static_cast<std::size_t>(k))};
      bool any = false;
      for (int i = 0; i < k; ++i) {
        double val = coef(c, i);
        if (std::abs(val) < 1e-11) val = 0.0;
        mo.coeff[static_cast<std::size_t>(i)] = val;
        any = any || val != 0.0;
      }
      if (any) out.push_back(std::move(mo));
    }
    return out;
  }

  /// Coefficient of the monomial with the given exponents in equation `eq`.
  double coefficient(int eq, const std::vector<int>& exps) const {
    for (const auto& mo : monomials())
      if (mo.exponents == exps) return mo.coeff[static_cast<std::size_t>(eq)];
    return 0.0;
  }

 private:
  static void enumerate(std::vector<std::vector<int>>& out, std::vector<int>& e, std::size_t i, int left) {
    if (i == e.size()) {
      out.push_back(e);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      e[i] = p;
      enumerate(out, e, i + 1, left - p);
    }
    e[i] = 0;
  }

  VectorFieldSpec spec_;
  LinearSubspace sub_;
};

/// Largest normal component |(I - P) f(x)| / (1 + |f(x)|) over sampled x in the subspace.
inline double invariance_residual(const VectorFieldSpec& spec, const LinearSubspace& sub, int samples = 64,
                                  std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  const Eigen::MatrixXd p = sub.projector().topLeftCorner(spec.dim(), spec.dim());
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.dim());
    for (int i = 0; i < sub.dim(); ++i) x += ud(rng) * sub[i].head(spec.dim());
    const Eigen::VectorXd f = eval_field(spec, x);
    worst = std::max(worst, (f - p * f).norm() / (1.0 + f.norm()));
  }
  return worst;
}

inline ReducedField restrict(const VectorFieldSpec& spec, const LinearSubspace& sub) {
  const double r = invariance_residual(spec, sub);
  if (r > 1e-10) throw InvarianceViolation("restrict: subspace is not flow-invariant", r);
  return ReducedField(spec, sub);
}

}  // namespace ps
