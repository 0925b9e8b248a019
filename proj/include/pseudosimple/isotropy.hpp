#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "group.hpp"

namespace ps {

/// True when g is an order-2 rotation fixing a plane pointwise.
inline bool is_plane_reflection(const Rotation4& g, double tol = 1e-9) {
  const Mat4 m = rotation_matrix(g);
  if ((m * m - Mat4::Identity()).norm() > tol || (m - Mat4::Identity()).norm() <= tol) return false;
  return fixed_subspace(Orthogonal4(g)).dim() == 2;
}

/// Relative position of the fixed planes of two plane reflections.
///
/// The planes share a line iff the first components of l1 l2 and r1 r2
/// coincide; that common value is cos(a) with a the angle between the
/// planes in the complement of the shared line. Returns a in [0, pi/2], or
/// nullopt when the first components differ.
inline std::optional<double> plane_pair_geometry(const Rotation4& p1, const Rotation4& p2, double tol = 1e-10) {
  if (!is_plane_reflection(p1) || !is_plane_reflection(p2))
    throw DomainError("plane_pair_geometry: inputs must be plane reflections");
  const double cl = (p1.left() * p2.left()).q1;
  const double cr = (p1.right() * p2.right()).q1;
  if (std::abs(cl - cr) > tol) return std::nullopt;
  return std::acos(std::clamp(std::abs(cl), 0.0, 1.0));
}

/// dim Fix(<g>) = 2 iff the real parts of l and r coincide. The identity
/// (dim 4) is reported as nullopt.
inline std::optional<bool> dim_fix_two_predicate(const Rotation4& g, double tol = 1e-10) {
  if (rotation_matrix(g).isApprox(Mat4::Identity(), 1e-12)) return std::nullopt;
  return std::abs(g.left().q1 - g.right().q1) <= tol;
}

struct IsotropyEntry {
  std::string label;
  LinearSubspace space;
};

namespace detail {
inline int mod2(int v) { return ((v % 2) + 2) % 2; }
inline std::string label(const char* head, std::initializer_list<int> idx) {
  std::string s(head);
  s += '(';
  bool first = true;
  for (int i : idx) {
    if (!first) s += ',';
    s += std::to_string(i);
    first = false;
  }
  return s + ')';
}
}  // namespace detail

inline LinearSubspace gl23_plane_p1(int s, int r) { return fixed_subspace(Orthogonal4(groups::epsilon(s, r))); }
inline LinearSubspace gl23_plane_p2(int q, int n, int t) { return fixed_subspace(Orthogonal4(groups::kappa(q, n, t))); }

/// L1(s,r) = P1(s,r) n P2(0,0,s+1) n P2(s+1,1,r+s+1) n P2(r,2,r+1).
inline LinearSubspace gl23_axis_l1(int s, int r) {
  using detail::mod2;
  return gl23_plane_p1(s, r)
      .intersect(gl23_plane_p2(0, 0, mod2(s + 1)))
      .intersect(gl23_plane_p2(mod2(s + 1), 1, mod2(r + s + 1)))
      .intersect(gl23_plane_p2(r, 2, mod2(r + 1)));
}

/// L2(s,r) = P1(s,r) n P2(1,0,s+1) n P2(s,1,r+s+1) n P2(r+1,2,r+1).
inline LinearSubspace gl23_axis_l2(int s, int r) {
  using detail::mod2;
  return gl23_plane_p1(s, r)
      .intersect(gl23_plane_p2(1, 0, mod2(s + 1)))
      .intersect(gl23_plane_p2(s, 1, mod2(r + s + 1)))
      .intersect(gl23_plane_p2(mod2(r + 1), 2, mod2(r + 1)));
}

/// Planes P1(s,r), P2(q,n,t) and axes L1(s,r), L2(s,r) of the order-48 group.
inline std::vector<IsotropyEntry> enumerate_isotropy_gl23(const GroupTable& group) {
  if (group.order() != 48) throw DomainError("enumerate_isotropy_gl23: group must have order 48");
  for (int s = 0; s < 2; ++s)
    for (int r = 0; r < 2; ++r)
      if (!group.contains(Orthogonal4(groups::epsilon(s, r))))
        throw DomainError("enumerate_isotropy_gl23: epsilon" + detail::label("", {s, r}) + " not in group");
  std::vector<IsotropyEntry> out;
  for (int s = 0; s < 2; ++s)
    for (int r = 0; r < 2; ++r) out.push_back({detail::label("P1", {s, r}), gl23_plane_p1(s, r)});
  for (int q = 0; q < 2; ++q)
    for (int n = 0; n < 3; ++n)
      for (int t = 0; t < 2; ++t) {
        if (!group.contains(Orthogonal4(groups::kappa(q, n, t))))
          throw DomainError("enumerate_isotropy_gl23: kappa" + detail::label("", {q, n, t}) + " not in group");
        out.push_back({detail::label("P2", {q, n, t}), gl23_plane_p2(q, n, t)});
      }
  for (int s = 0; s < 2; ++s)
    for (int r = 0; r < 2; ++r) {
      LinearSubspace l1 = gl23_axis_l1(s, r), l2 = gl23_axis_l2(s, r);
      if (l1.dim() != 1 || l2.dim() != 1) throw DomainError("enumerate_isotropy_gl23: axis is not one-dimensional");
      out.push_back({detail::label("L1", {s, r}), l1});
      out.push_back({detail::label("L2", {s, r}), l2});
    }
  return out;
}

}  // namespace ps
