#pragma once

// Manipulator Jacobians in the base frame and floating-base Jacobians in the
// world frame. Generalized coordinates are x = [p, q, θ] (quaternion base) or
// x = [p, roll, pitch, yaw, θ] (Euler base, op-count comparison only).

#include <cmath>
#include <vector>

#include "amdyn/common.hpp"
#include "amdyn/quat.hpp"
#include "amdyn/urdf.hpp"

namespace amdyn {

/// x = [p, q, θ] and ẋ = [ṗ, q̇, θ̇], quaternion in (w, x, y, z) order.
struct SystemState {
  VecXd x;
  VecXd dx;

  static SystemState at_rest(int num_joints) {
    SystemState s;
    s.x = VecXd::Zero(7 + num_joints);
    s.x[3] = 1.0;
    s.dx = VecXd::Zero(7 + num_joints);
    return s;
  }

  static SystemState make(const Vec3d& p, const UnitQuaternion& q, const VecXd& theta) {
    SystemState s = at_rest(static_cast<int>(theta.size()));
    s.x.head<3>() = p;
    s.x.segment<4>(3) = q.coeffs();
    s.x.tail(theta.size()) = theta;
    return s;
  }

  int num_joints() const { return static_cast<int>(x.size()) - 7; }
  Vec3d p() const { return x.head<3>(); }
  Quaterniond q() const { return Quaterniond::from_coeffs(x.segment<4>(3)); }
  VecXd theta() const { return x.tail(num_joints()); }
  Vec3d dp() const { return dx.head<3>(); }
  Vec4d dq() const { return dx.segment<4>(3); }
  VecXd dtheta() const { return dx.tail(num_joints()); }

  /// Body-frame angular velocity 2 G(q) q̇.
  Vec3d omega_body() const { return 2.0 * g_matrix(q()) * dq(); }
  Vec3d omega_world() const { return 2.0 * e_matrix(q()) * dq(); }

  /// q̇ that realizes body rate ω for the current q: ½ Gᵀ ω (tangent to the unit sphere).
  void set_omega_body(const Vec3d& omega) { dx.segment<4>(3) = 0.5 * g_matrix(q()).transpose() * omega; }

  bool finite() const { return x.allFinite() && dx.allFinite(); }
};

/// Per-body Jacobians of the arm relative to the base link frame L0.
template <class T>
struct ArmJacobian {
  MatRX<T, 3> Jt;  // 3 × N_J
  MatRX<T, 3> Jw;  // 3 × N_J
  Pose<T> pose;    // body pose in L0
};

/// Column k is n_k × (p_B − p_Jk) and n_k for ancestor joints, exactly zero otherwise.
template <class T>
std::vector<ArmJacobian<T>> base_frame_jacobians(const KinematicTree& tree, const VecX<T>& theta) {
  const auto poses = node_poses<T>(tree, theta);
  const int nj = tree.num_joints();
  std::vector<ArmJacobian<T>> out;
  out.reserve(tree.bodies().size());
  for (int b : tree.bodies()) {
    ArmJacobian<T> aj;
    aj.Jt = MatRX<T, 3>::Zero(3, nj);
    aj.Jw = MatRX<T, 3>::Zero(3, nj);
    aj.pose = poses[static_cast<std::size_t>(b)];
    for (int n : tree.parent_chain(b)) {
      const TreeNode& node = tree.node(n);
      if (node.kind != NodeKind::Joint || node.joint_index < 0) continue;
      const auto& pj = poses[static_cast<std::size_t>(n)];
      const Vec3<T> axis = pj.R.lazyProduct(node.axis.template cast<T>());
      aj.Jw.col(node.joint_index) = axis;
      aj.Jt.col(node.joint_index) = axis.cross(Vec3<T>(aj.pose.p - pj.p));
    }
    out.push_back(std::move(aj));
  }
  return out;
}

/// World-frame Jacobians of one body: ṗ_B = Jt ẋ and ω = Jw ẋ.
template <class T>
struct BodyJacobian {
  MatX<T> Jt;         // 3 × n
  MatX<T> Jw;         // rows × n (4 for the quaternion base, 3 for Euler)
  Mat3<T> R;          // world rotation of the body frame
  Vec3<T> p;          // world position of the body frame
  Mat3<T> R_base;     // world rotation of the base link
};

/// Floating base parameterized by a quaternion; ω is the 4-vector 2 q̇ ⊗ q*.
struct QuaternionBase {
  static constexpr int rot_dim = 4;
  static constexpr int ang_rows = 4;
  static const char* name() { return "quaternion"; }

  template <class T>
  static Quaternion<T> quaternion(const VecX<T>& x) {
    return {x[3], x[4], x[5], x[6]};
  }

  template <class T>
  static Mat3<T> rotation(const VecX<T>& x) {
    return to_rotation_matrix(quaternion(x));
  }

  /// Base-orientation columns of the translational and angular Jacobians.
  template <class T>
  static void base_columns(const VecX<T>& x, const Mat3<T>& R, const Vec3<T>& p_L0, MatX<T>& Jt, MatX<T>& Jw) {
    const Quaternion<T> q = quaternion(x);
    const Mat34<T> G = g_matrix(q);
    Jt.template block<3, 4>(0, 3) = T(-2.0) * R.lazyProduct(cross_matrix(p_L0)).lazyProduct(G);
    Jw.template block<4, 4>(0, 3) = T(2.0) * qr_matrix(q).transpose();
  }

  template <class T>
  static void joint_rows(const Mat3<T>& R, const MatRX<T, 3>& JwL0, MatX<T>& Jw, int col) {
    Jw.block(1, col, 3, JwL0.cols()) = R.lazyProduct(JwL0);
  }

  /// Θ = diag(ν, Φ^W).
  template <class T>
  static MatX<T> theta_block(double nu, const Mat3<T>& phi_world) {
    MatX<T> th = MatX<T>::Zero(4, 4);
    th(0, 0) = T(nu);
    th.block(1, 1, 3, 3) = phi_world;
    return th;
  }
};

/// ZYX Euler base with x = [p, roll, pitch, yaw, θ] and R = Rz(yaw) Ry(pitch) Rx(roll).
struct EulerBase {
  static constexpr int rot_dim = 3;
  static constexpr int ang_rows = 3;
  static const char* name() { return "euler"; }

  template <class T>
  static Mat3<T> rotation(const VecX<T>& x) {
    using std::cos;
    using std::sin;
    const T cr = cos(x[3]), sr = sin(x[3]), cp = cos(x[4]), sp = sin(x[4]), cy = cos(x[5]), sy = sin(x[5]);
    Mat3<T> R;
    R << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp, cp * sr, cp * cr;
    return R;
  }

  /// ω_world = E_w(roll, pitch, yaw) · (roll, pitch, yaw)ᵗ-rates.
  template <class T>
  static Mat3<T> rate_matrix(const VecX<T>& x) {
    using std::cos;
    using std::sin;
    const T cp = cos(x[4]), sp = sin(x[4]), cy = cos(x[5]), sy = sin(x[5]);
    Mat3<T> E;
    E << cy * cp, -sy, T(0.0),
         sy * cp, cy, T(0.0),
         -sp, T(0.0), T(1.0);
    return E;
  }

  template <class T>
  static void base_columns(const VecX<T>& x, const Mat3<T>& R, const Vec3<T>& p_L0, MatX<T>& Jt, MatX<T>& Jw) {
    const Mat3<T> E = rate_matrix(x);
    const Vec3<T> lever = R.lazyProduct(p_L0);
    Jt.template block<3, 3>(0, 3) = -cross_matrix(lever).lazyProduct(E);
    Jw.template block<3, 3>(0, 3) = E;
  }

  template <class T>
  static void joint_rows(const Mat3<T>& R, const MatRX<T, 3>& JwL0, MatX<T>& Jw, int col) {
    Jw.block(0, col, 3, JwL0.cols()) = R.lazyProduct(JwL0);
  }

  template <class T>
  static MatX<T> theta_block(double, const Mat3<T>& phi_world) {
    return phi_world;
  }
};

/// det E_w = cos(pitch); zero at gimbal lock.
inline double euler_rate_determinant(double roll, double pitch, double yaw) {
  VecXd x = VecXd::Zero(6);
  x[3] = roll;
  x[4] = pitch;
  x[5] = yaw;
  return EulerBase::rate_matrix<double>(x).determinant();
}

/// World-frame Jacobians of every body in tree body order.
template <class P, class T>
std::vector<BodyJacobian<T>> body_jacobians(const KinematicTree& tree, const VecX<T>& x) {
  const int nj = tree.num_joints();
  const int n = 3 + P::rot_dim + nj;
  if (x.size() != n)
    throw DimensionError("state has " + std::to_string(x.size()) + " coordinates, expected " + std::to_string(n));
  const VecX<T> theta = x.tail(nj);
  const auto arm = base_frame_jacobians<T>(tree, theta);
  const Mat3<T> R = P::rotation(x);
  const Vec3<T> p = x.template head<3>();
  std::vector<BodyJacobian<T>> out;
  out.reserve(arm.size());
  for (const auto& a : arm) {
    BodyJacobian<T> bj;
    bj.Jt = MatX<T>::Zero(3, n);
    bj.Jw = MatX<T>::Zero(P::ang_rows, n);
    bj.Jt.template block<3, 3>(0, 0) = Mat3<T>::Identity();
    P::base_columns(x, R, a.pose.p, bj.Jt, bj.Jw);
    if (nj > 0) {
      bj.Jt.block(0, 3 + P::rot_dim, 3, nj) = R.lazyProduct(a.Jt);
      P::joint_rows(R, a.Jw, bj.Jw, 3 + P::rot_dim);
    }
    bj.R_base = R;
    bj.R = R.lazyProduct(a.pose.R);
    bj.p = p + R.lazyProduct(a.pose.p);
    out.push_back(std::move(bj));
  }
  return out;
}

/// J_W: all translational rows (body order), then all angular rows.
template <class P = QuaternionBase>
MatXd system_jacobian(const KinematicTree& tree, const VecXd& x) {
  const auto bj = body_jacobians<P, double>(tree, x);
  const int nb = static_cast<int>(bj.size());
  MatXd J(nb * (3 + P::ang_rows), x.size());
  for (int i = 0; i < nb; ++i) {
    J.block(3 * i, 0, 3, x.size()) = bj[static_cast<std::size_t>(i)].Jt;
    J.block(3 * nb + P::ang_rows * i, 0, P::ang_rows, x.size()) = bj[static_cast<std::size_t>(i)].Jw;
  }
  return J;
}

struct BodyVelocity {
  Vec3d linear;
  VecXd angular;  // 4-vector (scaling rate, ω_world) for the quaternion base
};

template <class P = QuaternionBase>
std::vector<BodyVelocity> world_velocity(const KinematicTree& tree, const VecXd& x, const VecXd& dx) {
  if (dx.size() != x.size()) throw DimensionError("velocity and coordinate dimensions differ");
  std::vector<BodyVelocity> out;
  for (const auto& bj : body_jacobians<P, double>(tree, x)) out.push_back({bj.Jt * dx, bj.Jw * dx});
  return out;
}

inline std::vector<BodyVelocity> world_velocity(const KinematicTree& tree, const SystemState& s) {
  return world_velocity<QuaternionBase>(tree, s.x, s.dx);
}

/// Drops the leading scaling component of a 4-row angular velocity.
inline Vec3d strip_scaling(const VecXd& w) { return w.size() == 4 ? Vec3d(w.tail<3>()) : Vec3d(w.head<3>()); }

/// World positions of every body.
template <class P = QuaternionBase>
std::vector<Vec3d> body_positions(const KinematicTree& tree, const VecXd& x) {
  std::vector<Vec3d> out;
  for (const auto& bj : body_jacobians<P, double>(tree, x)) out.push_back(bj.p);
  return out;
}

}  // namespace amdyn
