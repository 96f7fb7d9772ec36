#pragma once

// Quaternion algebra in (w, x, y, z) order, the matrix forms of the
// quaternion product and the angular-velocity maps E and G.

#include <algorithm>
#include <cmath>

#include "amdyn/common.hpp"

namespace amdyn {

template <class T>
struct Quaternion {
  T w{1.0};
  Vec3<T> v{Vec3<T>::Zero()};

  Quaternion() = default;
  Quaternion(const T& w_, const Vec3<T>& v_) : w(w_), v(v_) {}
  Quaternion(const T& w_, const T& x, const T& y, const T& z) : w(w_), v(x, y, z) {}

  static Quaternion identity() { return {T(1.0), Vec3<T>::Zero()}; }
  static Quaternion pure(const Vec3<T>& u) { return {T(0.0), u}; }
  static Quaternion from_coeffs(const Vec4<T>& c) { return {c[0], Vec3<T>(c[1], c[2], c[3])}; }

  Vec4<T> coeffs() const { return Vec4<T>(w, v[0], v[1], v[2]); }

  friend Quaternion operator+(const Quaternion& a, const Quaternion& b) { return {a.w + b.w, a.v + b.v}; }
  friend Quaternion operator-(const Quaternion& a, const Quaternion& b) { return {a.w - b.w, a.v - b.v}; }
  friend Quaternion operator*(const T& s, const Quaternion& a) { return {s * a.w, s * a.v}; }
};

using Quaterniond = Quaternion<double>;

/// Hamilton product a ⊗ b.
template <class T>
Quaternion<T> qmul(const Quaternion<T>& a, const Quaternion<T>& b) {
  return {a.w * b.w - a.v.dot(b.v), a.w * b.v + b.w * a.v + a.v.cross(b.v)};
}

template <class T>
Quaternion<T> conjugate(const Quaternion<T>& q) {
  return {q.w, -q.v};
}

template <class T>
T squared_norm(const Quaternion<T>& q) {
  return q.w * q.w + q.v.dot(q.v);
}

inline double norm(const Quaterniond& q) { return std::sqrt(squared_norm(q)); }

inline Quaterniond inverse(const Quaterniond& q) {
  const double n2 = squared_norm(q);
  if (!(n2 > 0.0)) throw DomainError("inverse of a zero quaternion");
  return {q.w / n2, -q.v / n2};
}

/// Skew-symmetric matrix with cross_matrix(a) * b == a × b.
template <class T>
Mat3<T> cross_matrix(const Vec3<T>& a) {
  Mat3<T> m;
  m << T(0.0), -a[2], a[1],
       a[2], T(0.0), -a[0],
       -a[1], a[0], T(0.0);
  return m;
}

/// Left-product operator: ql_matrix(q) * p == q ⊗ p.
template <class T>
Mat4<T> ql_matrix(const Quaternion<T>& q) {
  Mat4<T> m;
  m(0, 0) = q.w;
  m.template block<1, 3>(0, 1) = -q.v.transpose();
  m.template block<3, 1>(1, 0) = q.v;
  m.template block<3, 3>(1, 1) = q.w * Mat3<T>::Identity() + cross_matrix(q.v);
  return m;
}

/// Right-product operator: qr_matrix(q) * p == p ⊗ q.
template <class T>
Mat4<T> qr_matrix(const Quaternion<T>& q) {
  Mat4<T> m;
  m(0, 0) = q.w;
  m.template block<1, 3>(0, 1) = -q.v.transpose();
  m.template block<3, 1>(1, 0) = q.v;
  m.template block<3, 3>(1, 1) = q.w * Mat3<T>::Identity() - cross_matrix(q.v);
  return m;
}

/// ω_world = 2 E(q) q̇.
template <class T>
Mat34<T> e_matrix(const Quaternion<T>& q) {
  Mat34<T> m;
  m.col(0) = -q.v;
  m.template block<3, 3>(0, 1) = q.w * Mat3<T>::Identity() + cross_matrix(q.v);
  return m;
}

/// ω_body = 2 G(q) q̇.
template <class T>
Mat34<T> g_matrix(const Quaternion<T>& q) {
  Mat34<T> m;
  m.col(0) = -q.v;
  m.template block<3, 3>(0, 1) = q.w * Mat3<T>::Identity() - cross_matrix(q.v);
  return m;
}

/// R = E Gᵀ. Proper rotation for unit q; scales by ‖q‖² otherwise.
template <class T>
Mat3<T> to_rotation_matrix(const Quaternion<T>& q) {
  return e_matrix(q).lazyProduct(g_matrix(q).transpose());
}

/// Rotation by `theta` about `axis` (unit length assumed): I + sinθ[u]× + (1−cosθ)[u]×².
template <class T>
Mat3<T> rodrigues_unchecked(const T& theta, const Vec3<T>& axis) {
  using std::cos;
  using std::sin;
  const Mat3<T> k = cross_matrix(axis);
  return Mat3<T>::Identity() + sin(theta) * k + (T(1.0) - cos(theta)) * k.lazyProduct(k);
}

namespace detail {
inline Vec3d checked_unit_axis(const Vec3d& u) {
  const double n = u.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-9) throw DomainError("rotation axis is not unit length");
  return u / n;
}
}  // namespace detail

inline Mat3d rodrigues(double theta, const Vec3d& axis) {
  return rodrigues_unchecked<double>(theta, detail::checked_unit_axis(axis));
}

/// Quaternion of unit norm. Construction normalizes; zero or non-finite input is rejected.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  explicit UnitQuaternion(const Quaterniond& q) {
    const double n = norm(q);
    if (!std::isfinite(n) || n == 0.0) throw DomainError("cannot normalize a zero or non-finite quaternion");
    q_ = {q.w / n, q.v / n};
  }
  UnitQuaternion(double w, double x, double y, double z) : UnitQuaternion(Quaterniond(w, x, y, z)) {}

  /// Rejects input whose norm differs from one by more than `tol`.
  static UnitQuaternion checked(const Quaterniond& q, double tol = 1e-9) {
    if (!(std::abs(norm(q) - 1.0) <= tol)) throw DomainError("quaternion is not unit length");
    return UnitQuaternion(q);
  }

  const Quaterniond& value() const { return q_; }
  double w() const { return q_.w; }
  const Vec3d& vec() const { return q_.v; }
  Vec4d coeffs() const { return q_.coeffs(); }

  UnitQuaternion conjugate() const {
    UnitQuaternion r;
    r.q_ = amdyn::conjugate(q_);
    return r;
  }
  Mat3d rotation_matrix() const { return to_rotation_matrix(q_); }

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
    return UnitQuaternion(qmul(a.q_, b.q_));
  }

 private:
  Quaterniond q_{Quaterniond::identity()};
};

/// (cos θ/2, u sin θ/2). Axes within 1e-9 of unit length are renormalized.
inline UnitQuaternion from_axis_angle(const Vec3d& axis, double theta) {
  const Vec3d u = detail::checked_unit_axis(axis);
  return UnitQuaternion(Quaterniond(std::cos(0.5 * theta), std::sin(0.5 * theta) * u));
}

/// q ⊗ (0, u) ⊗ q*.
inline Vec3d rotate(const UnitQuaternion& q, const Vec3d& u) {
  return qmul(qmul(q.value(), Quaterniond::pure(u)), amdyn::conjugate(q.value())).v;
}

/// Z-Y-X (yaw, pitch, roll) composition q = q_z(yaw) ⊗ q_y(pitch) ⊗ q_x(roll).
inline UnitQuaternion from_roll_pitch_yaw(double roll, double pitch, double yaw) {
  return from_axis_angle(Vec3d::UnitZ(), yaw) * from_axis_angle(Vec3d::UnitY(), pitch) *
         from_axis_angle(Vec3d::UnitX(), roll);
}

inline Vec3d to_roll_pitch_yaw(const UnitQuaternion& q) {
  const Mat3d r = q.rotation_matrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

}  // namespace amdyn
