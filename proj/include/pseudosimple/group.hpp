#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quaternion.hpp"

namespace ps {

/// Orthogonal 4x4 transformation. Carries both SO(4) elements built from
/// quaternion pairs and orientation-reversing reflections.
class Orthogonal4 {
 public:
  Orthogonal4() : m_(Mat4::Identity()) {}
  explicit Orthogonal4(const Mat4& m, double tol = 1e-10) : m_(m) {
    const double err = (m_.transpose() * m_ - Mat4::Identity()).norm();
    if (!(err <= tol)) throw InvalidElement("matrix is not orthogonal (residual " + std::to_string(err) + ")");
  }
  explicit Orthogonal4(const Rotation4& g) : m_(rotation_matrix(g)) {}

  const Mat4& matrix() const { return m_; }
  double determinant() const { return m_.determinant(); }
  Vec4 operator*(const Vec4& x) const { return m_ * x; }
  Orthogonal4 operator*(const Orthogonal4& o) const { return Orthogonal4(m_ * o.m_, 1e-8); }
  Orthogonal4 inverse() const { return Orthogonal4(Mat4(m_.transpose()), 1e-8); }
  double distance(const Orthogonal4& o) const { return (m_ - o.m_).norm(); }
  bool is_identity(double tol = 1e-9) const { return (m_ - Mat4::Identity()).norm() <= tol; }

 private:
  Mat4 m_;
};

/// Orthonormal basis of a subspace of R^4.
class LinearSubspace {
 public:
  LinearSubspace() = default;
  /// Orthonormalizes the given spanning vectors; vectors below `rank_tol`
  /// after projection are dropped.
  explicit LinearSubspace(const std::vector<Vec4>& span, double rank_tol = 1e-9) {
    for (const Vec4& v : span) {
      Vec4 w = v;
      for (int pass = 0; pass < 2; ++pass)
        for (const Vec4& b : basis_) w -= b.dot(w) * b;
      if (w.norm() > rank_tol * std::max(1.0, v.norm())) basis_.push_back(w.normalized());
      if (basis_.size() == 4) break;
    }
  }
  static LinearSubspace full() {
    return LinearSubspace({Vec4::Unit(0), Vec4::Unit(1), Vec4::Unit(2), Vec4::Unit(3)});
  }
  /// Subspace spanned by eigenvectors of a symmetric matrix with eigenvalue
  /// above `threshold`.
  static LinearSubspace from_projector(const Mat4& p, double threshold = 0.5) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (p + p.transpose()));
    std::vector<Vec4> vs;
    for (int i = 3; i >= 0; --i)
      if (es.eigenvalues()[i] > threshold) vs.push_back(canonical_sign(es.eigenvectors().col(i)));
    LinearSubspace s;
    s.basis_ = LinearSubspace(vs).basis_;
    return s;
  }

  /// Flips v so that its first entry with |v_i| > 1e-9 is positive.
  static Vec4 canonical_sign(const Vec4& v) {
    for (int i = 0; i < 4; ++i)
      if (std::abs(v[i]) > 1e-9) return v[i] < 0 ? Vec4(-v) : v;
    return v;
  }

  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<Vec4>& basis() const { return basis_; }
  const Vec4& operator[](int i) const { return basis_[static_cast<std::size_t>(i)]; }

  Mat4 projector() const {
    Mat4 p = Mat4::Zero();
    for (const Vec4& b : basis_) p += b * b.transpose();
    return p;
  }
  Eigen::Matrix<double, 4, Eigen::Dynamic> basis_matrix() const {
    Eigen::Matrix<double, 4, Eigen::Dynamic> b(4, dim());
    for (int i = 0; i < dim(); ++i) b.col(i) = basis_[static_cast<std::size_t>(i)];
    return b;
  }
  double distance(const Vec4& x) const { return (x - projector() * x).norm(); }
  bool contains(const Vec4& x, double tol = 1e-9) const { return distance(x) <= tol * std::max(1.0, x.norm()); }

  LinearSubspace intersect(const LinearSubspace& o) const {
    // Null space of (I - P1) + (I - P2).
    const Mat4 m = 2.0 * Mat4::Identity() - projector() - o.projector();
    Eigen::SelfAdjointEigenSolver<Mat4> es(m);
    std::vector<Vec4> vs;
    for (int i = 0; i < 4; ++i)
      if (es.eigenvalues()[i] < 1e-9) vs.push_back(canonical_sign(es.eigenvectors().col(i)));
    return LinearSubspace(vs);
  }
  LinearSubspace orthogonal_complement() const {
    return from_projector(Mat4(Mat4::Identity() - projector()));
  }
  LinearSubspace transformed(const Orthogonal4& g) const {
    std::vector<Vec4> vs;
    for (const Vec4& b : basis_) vs.push_back(g * b);
    return LinearSubspace(vs);
  }
  /// Largest principal angle between equal-dimension subspaces (radians).
  double max_principal_angle(const LinearSubspace& o) const {
    if (dim() != o.dim()) return std::numbers::pi / 2;
    if (dim() == 0) return 0.0;
    // Sine form: acos of a singular value near 1 loses half the digits.
    const Eigen::MatrixXd r = (Mat4::Identity() - o.projector()) * basis_matrix();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const double smax = std::clamp(svd.singularValues().maxCoeff(), 0.0, 1.0);
    return std::asin(smax);
  }
  bool same_as(const LinearSubspace& o, double angle_tol = 1e-8) const {
    return dim() == o.dim() && max_principal_angle(o) <= angle_tol;
  }

 private:
  std::vector<Vec4> basis_;
};

/// Finite group of orthogonal transformations with its Cayley table.
class GroupTable {
 public:
  GroupTable() = default;
  GroupTable(std::vector<Orthogonal4> elements, std::string name = {}) : name_(std::move(name)) {
    std::sort(elements.begin(), elements.end(), [](const Orthogonal4& a, const Orthogonal4& b) {
      return sort_key(a) < sort_key(b);
    });
    elements_ = std::move(elements);
    const std::size_t n = elements_.size();
    product_.assign(n, std::vector<int>(n, -1));
    inverse_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (elements_[i].is_identity()) identity_ = static_cast<int>(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto k = find(Orthogonal4(Mat4(elements_[i].matrix() * elements_[j].matrix()), 1e-8), 1e-9);
        if (!k) throw DomainError("GroupTable: element set is not closed under products");
        product_[i][j] = *k;
        if (*k == identity_ || elements_[static_cast<std::size_t>(*k)].is_identity()) inverse_[i] = static_cast<int>(j);
      }
    }
    if (identity_ < 0) throw DomainError("GroupTable: identity missing");
  }

  const std::string& name() const { return name_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<Orthogonal4>& elements() const { return elements_; }
  const Orthogonal4& operator[](std::size_t i) const { return elements_[i]; }
  int product(int i, int j) const { return product_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
  int inverse(int i) const { return inverse_[static_cast<std::size_t>(i)]; }
  int identity() const { return identity_; }
  const std::vector<std::vector<int>>& product_table() const { return product_; }
  const std::vector<int>& inverse_table() const { return inverse_; }

  std::optional<int> find(const Orthogonal4& g, double tol = 1e-6) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
      if (elements_[i].distance(g) <= tol) return static_cast<int>(i);
    return std::nullopt;
  }
  bool contains(const Orthogonal4& g, double tol = 1e-6) const { return find(g, tol).has_value(); }

  bool all_special() const {
    return std::all_of(elements_.begin(), elements_.end(),
                       [](const Orthogonal4& g) { return g.determinant() > 0; });
  }

  /// Indices of the subgroup generated by the given element indices.
  std::vector<int> generated_subgroup(const std::vector<int>& gens) const {
    std::vector<int> out{identity_};
    std::vector<char> seen(order(), 0);
    seen[static_cast<std::size_t>(identity_)] = 1;
    for (std::size_t k = 0; k < out.size(); ++k)
      for (int g : gens) {
        const int p = product(out[k], g);
        if (!seen[static_cast<std::size_t>(p)]) {
          seen[static_cast<std::size_t>(p)] = 1;
          out.push_back(p);
        }
      }
    std::sort(out.begin(), out.end());
    return out;
  }
  bool is_subgroup(const std::vector<int>& idx) const {
    std::vector<char> in(order(), 0);
    for (int i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= order()) return false;
      in[static_cast<std::size_t>(i)] = 1;
    }
    if (idx.empty() || !in[static_cast<std::size_t>(identity_)]) return false;
    for (int i : idx) {
      if (!in[static_cast<std::size_t>(inverse(i))]) return false;
      for (int j : idx)
        if (!in[static_cast<std::size_t>(product(i, j))]) return false;
    }
    return true;
  }
  int element_order(int i) const {
    int k = 1;
    for (int p = i; p != identity_; p = product(p, i)) ++k;
    return k;
  }

 private:
  static std::array<std::int64_t, 16> sort_key(const Orthogonal4& g) {
    std::array<std::int64_t, 16> key{};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) key[static_cast<std::size_t>(4 * r + c)] = std::llround(g.matrix()(r, c) * 1e8);
    return key;
  }

  std::string name_;
  std::vector<Orthogonal4> elements_;
  std::vector<std::vector<int>> product_;
  std::vector<int> inverse_;
  int identity_ = -1;
};

inline constexpr std::size_t kDefaultMaxOrder = 512;

/// Smallest set containing the generators and the identity that is closed
/// under multiplication. Elements are deduplicated at 1e-6 Frobenius
/// distance and sorted lexicographically on rounded entries.
inline GroupTable generate_group(const std::vector<Orthogonal4>& generators, std::size_t max_order = kDefaultMaxOrder,
                                 std::string name = {}) {
  std::vector<Orthogonal4> els{Orthogonal4()};
  auto known = [&els](const Orthogonal4& g) {
    return std::any_of(els.begin(), els.end(), [&g](const Orthogonal4& e) { return e.distance(g) <= 1e-6; });
  };
  for (std::size_t k = 0; k < els.size(); ++k) {
    for (const Orthogonal4& g : generators) {
      Orthogonal4 p = g * els[k];
      if (!known(p)) {
        els.push_back(p);
        if (els.size() > max_order)
          throw GroupGrowthError("group closure exceeded max_order = " + std::to_string(max_order));
      }
    }
  }
  return GroupTable(std::move(els), std::move(name));
}

/// Fix(Sigma) for a subgroup given by element indices: the 1-eigenspace of
/// the average (1/|Sigma|) sum_g M_g.
inline LinearSubspace fixed_subspace(const GroupTable& group, const std::vector<int>& subgroup) {
  if (!group.is_subgroup(subgroup)) throw DomainError("fixed_subspace: index set is not a subgroup");
  Mat4 p = Mat4::Zero();
  for (int i : subgroup) p += group[static_cast<std::size_t>(i)].matrix();
  p /= static_cast<double>(subgroup.size());
  return LinearSubspace::from_projector(p);
}

/// Fix of the cyclic group generated by a single transformation.
inline LinearSubspace fixed_subspace(const Orthogonal4& g) {
  std::vector<Orthogonal4> powers{Orthogonal4()};
  Orthogonal4 p = g;
  while (!p.is_identity(1e-7)) {
    powers.push_back(p);
    if (powers.size() > kDefaultMaxOrder) throw DomainError("fixed_subspace: element has infinite order");
    p = p * g;
  }
  Mat4 avg = Mat4::Zero();
  for (const auto& q : powers) avg += q.matrix();
  return LinearSubspace::from_projector(avg / static_cast<double>(powers.size()));
}

// ---------------------------------------------------------------------------
// The concrete groups.

namespace groups {

inline Mat4 complex_pair_map(std::complex<double> a11, std::complex<double> a22, bool conj1, bool conj2) {
  // (z1, z2) -> (a11 * z1^(*), a22 * z2^(*)) written on (x1, y1, x2, y2).
  auto block = [](std::complex<double> a, bool conj) {
    Eigen::Matrix2d m;
    m << a.real(), -a.imag(), a.imag(), a.real();
    if (conj) m.col(1) *= -1.0;
    return m;
  };
  Mat4 m = Mat4::Zero();
  m.block<2, 2>(0, 0) = block(a11, conj1);
  m.block<2, 2>(2, 2) = block(a22, conj2);
  return m;
}

/// rho: (z1, z2) -> (z1, e^{2 pi i / 3} z2).
inline Orthogonal4 d3_rho() { return Orthogonal4(complex_pair_map(1.0, std::polar(1.0, 2 * std::numbers::pi / 3), false, false)); }
/// kappa: (z1, z2) -> (conj z1, conj z2).
inline Orthogonal4 d3_kappa() { return Orthogonal4(complex_pair_map(1.0, 1.0, true, true)); }
/// sigma: (z1, z2) -> (z1, conj z2); orientation reversing.
inline Orthogonal4 d3_sigma() { return Orthogonal4(complex_pair_map(1.0, 1.0, false, true)); }

/// Gamma = <rho, kappa>, isomorphic to D3.
inline GroupTable gamma_d3() { return generate_group({d3_rho(), d3_kappa()}, kDefaultMaxOrder, "Gamma(D3)"); }
/// Gamma~ = Gamma u sigma Gamma, isomorphic to D3 x Z2.
inline GroupTable gamma_tilde() {
  return generate_group({d3_rho(), d3_kappa(), d3_sigma()}, kDefaultMaxOrder, "Gamma~(D3xZ2)");
}

inline const double kSqrt2 = std::sqrt(2.0);
inline const double kSqrt3 = std::sqrt(3.0);

/// epsilon(s, r): order-3 generators of the P1-type isotropy subgroups.
inline Rotation4 epsilon(int s, int r) {
  const double ss = (s % 2) ? -1.0 : 1.0, rr = (r % 2) ? -1.0 : 1.0;
  return {Quaternion(0.5, 0, 0, kSqrt3 / 2), Quaternion(1, ss, rr, ss * rr) / 2.0};
}

/// kappa(q, n, t): plane reflections generating the P2-type isotropy
/// subgroups. The sign (-1)^q multiplies the right factor only, so
/// kappa(0, n, t) and kappa(1, n, t) fix mutually orthogonal planes.
inline Rotation4 kappa(int q, int n, int t) {
  n = ((n % 3) + 3) % 3;
  Quaternion r(0, 0, (t % 2) ? -1.0 : 1.0, 1);
  for (int k = 0; k < n; ++k) r = Quaternion(r.q1, r.q3, r.q4, r.q2);  // p(a,b,c,d) = (a,c,d,b)
  r = r / kSqrt2;
  if (q % 2) r = -r;
  return {Quaternion(0, std::cos(n * std::numbers::pi / 3), std::sin(n * std::numbers::pi / 3), 0), r};
}

/// The order-48 group (D3|Z2; O|V), the irreducible 4-dimensional
/// representation of GL(2,3).
inline GroupTable gl23() {
  const std::vector<Orthogonal4> gens{
      Orthogonal4(epsilon(0, 0)),
      Orthogonal4(Rotation4(Quaternion(0, 1, 0, 0), Quaternion(1, 1, 0, 0) / kSqrt2)),
      Orthogonal4(Rotation4(Quaternion(1, 0, 0, 0), Quaternion(0, 1, 0, 0))),
      Orthogonal4(Rotation4(Quaternion(1, 0, 0, 0), Quaternion(0, 0, 1, 0))),
  };
  return generate_group(gens, kDefaultMaxOrder, "(D3|Z2;O|V)");
}

/// The D3 action on the plane, embedded in the (x1, y1) block of R^4.
inline GroupTable planar_d3() {
  const Orthogonal4 rot(complex_pair_map(std::polar(1.0, 2 * std::numbers::pi / 3), 1.0, false, false));
  const Orthogonal4 refl(complex_pair_map(1.0, 1.0, true, false));
  return generate_group({rot, refl}, kDefaultMaxOrder, "D3(planar)");
}

}  // namespace groups

}  // namespace ps
