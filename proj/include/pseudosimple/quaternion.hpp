#pragma once

#include <array>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "errors.hpp"

namespace ps {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Real quaternion (q1 + q2 i + q3 j + q4 k).
struct Quaternion {
  double q1 = 1.0, q2 = 0.0, q3 = 0.0, q4 = 0.0;

  constexpr Quaternion() = default;
  constexpr Quaternion(double a, double b, double c, double d) : q1(a), q2(b), q3(c), q4(d) {}
  static Quaternion from_vector(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

  Vec4 vector() const { return {q1, q2, q3, q4}; }
  constexpr Quaternion conjugate() const { return {q1, -q2, -q3, -q4}; }
  constexpr double norm2() const { return q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4; }
  double norm() const { return std::sqrt(norm2()); }
  Quaternion normalized() const {
    const double n = norm();
    return {q1 / n, q2 / n, q3 / n, q4 / n};
  }
  bool is_unit(double tol = 1e-10) const { return std::abs(norm() - 1.0) <= tol; }

  constexpr Quaternion operator-() const { return {-q1, -q2, -q3, -q4}; }
  constexpr Quaternion operator*(double s) const { return {q1 * s, q2 * s, q3 * s, q4 * s}; }
  constexpr Quaternion operator/(double s) const { return {q1 / s, q2 / s, q3 / s, q4 / s}; }
};

// Hamilton product, ij = k, jk = i, ki = j.
constexpr Quaternion operator*(const Quaternion& q, const Quaternion& w) {
  return {q.q1 * w.q1 - q.q2 * w.q2 - q.q3 * w.q3 - q.q4 * w.q4,
          q.q1 * w.q2 + q.q2 * w.q1 + q.q3 * w.q4 - q.q4 * w.q3,
          q.q1 * w.q3 - q.q2 * w.q4 + q.q3 * w.q1 + q.q4 * w.q2,
          q.q1 * w.q4 + q.q2 * w.q3 - q.q3 * w.q2 + q.q4 * w.q1};
}

inline Quaternion quat_mul(const Quaternion& a, const Quaternion& b) { return a * b; }

inline std::ostream& operator<<(std::ostream& os, const Quaternion& q) {
  return os << '(' << q.q1 << ',' << q.q2 << ',' << q.q3 << ',' << q.q4 << ')';
}

/// Unit-quaternion pair (l, r) acting on R^4 = H by q -> l q r~.
///
/// The pairs (l, r) and (-l, -r) give the same rotation; the stored
/// representative has the first nonzero component of `left` positive.
class Rotation4 {
 public:
  Rotation4() = default;
  Rotation4(const Quaternion& left, const Quaternion& right) : left_(left), right_(right) {
    if (!left_.is_unit() || !right_.is_unit())
      throw InvalidElement("Rotation4 requires unit quaternions");
    canonicalize();
  }

  const Quaternion& left() const { return left_; }
  const Quaternion& right() const { return right_; }

  /// Componentwise product; corresponds to matrix product of the rotations.
  Rotation4 operator*(const Rotation4& o) const { return {left_ * o.left_, right_ * o.right_}; }
  Rotation4 inverse() const { return {left_.conjugate(), right_.conjugate()}; }

  Vec4 apply(const Vec4& x) const {
    return (left_ * Quaternion::from_vector(x) * right_.conjugate()).vector();
  }

 private:
  void canonicalize() {
    const std::array<double, 4> c{left_.q1, left_.q2, left_.q3, left_.q4};
    for (double v : c) {
      if (std::abs(v) > 1e-14) {
        if (v < 0) {
          left_ = -left_;
          right_ = -right_;
        }
        return;
      }
    }
  }

  Quaternion left_{};
  Quaternion right_{};
};

/// 4x4 matrix of q -> l q r~.
inline Mat4 rotation_matrix(const Rotation4& g) {
  Mat4 m;
  for (int j = 0; j < 4; ++j) m.col(j) = g.apply(Vec4::Unit(j));
  return m;
}

/// Recovers (l, r) from a rotation matrix M in SO(4).
///
/// q -> M(q) M(1)~ equals q -> l q l~, an SO(3) rotation of the pure
/// quaternions, from which l follows; then r~ = l~ M(1).
inline Rotation4 decompose_rotation(const Mat4& m) {
  if ((m.transpose() * m - Mat4::Identity()).norm() > 1e-9 || m.determinant() < 0)
    throw InvalidElement("decompose_rotation: matrix is not in SO(4)");
  const Quaternion a = Quaternion::from_vector(m.col(0));
  Eigen::Matrix3d r3;
  for (int j = 0; j < 3; ++j) {
    const Quaternion img = Quaternion::from_vector(m.col(j + 1)) * a.conjugate();
    r3.col(j) << img.q2, img.q3, img.q4;
  }
  Eigen::Quaterniond eq(r3);
  const Quaternion l = Quaternion(eq.w(), eq.x(), eq.y(), eq.z()).normalized();
  const Quaternion r = (l.conjugate() * a).conjugate().normalized();
  return {l, r};
}

}  // namespace ps
