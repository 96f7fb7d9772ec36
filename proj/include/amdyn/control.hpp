#pragma once

// Computed-torque control: ν = M_F(ẍ_d + K_v ė + K_p e), τ = Mν + Cẋ + g,
// f_b = M_F⁺τ, f_mot = M_mot⁺ f_b.

#include <algorithm>
#include <string>

#include "amdyn/common.hpp"
#include "amdyn/constraint.hpp"
#include "amdyn/dynamics.hpp"

namespace amdyn {

struct Gains {
  VecXd kv;  // 6 + N_J
  VecXd kp;  // 6 + N_J

  void validate(int num_joints) const {
    const Eigen::Index n = 6 + num_joints;
    if (kv.size() != n || kp.size() != n)
      throw DimensionError("gains need " + std::to_string(n) + " entries (3 translation, 3 attitude, joints)");
    if ((kv.array() < 0.0).any() || (kp.array() < 0.0).any()) throw ValidationError("gains must be non-negative");
  }
};

/// Hand-tuned diagonals for the 2-link arm: z, roll, pitch, yaw, joints; x and y are unactuated.
inline Gains default_gains(int num_joints) {
  Gains g;
  g.kv = VecXd::Zero(6 + num_joints);
  g.kp = VecXd::Zero(6 + num_joints);
  g.kv.head<6>() << 0, 0, 10, 5, 5, 4;
  g.kp.head<6>() << 0, 0, 30, 40, 40, 30;
  const double kv_j[] = {24, 24}, kp_j[] = {60, 120};
  for (int j = 0; j < num_joints; ++j) {
    g.kv[6 + j] = kv_j[std::min(j, 1)];
    g.kp[6 + j] = kp_j[std::min(j, 1)];
  }
  return g;
}

struct Reference {
  Vec3d p{Vec3d::Zero()};
  UnitQuaternion q;
  VecXd theta;
  Vec3d dp{Vec3d::Zero()};
  Vec3d omega_body{Vec3d::Zero()};
  VecXd dtheta;
  VecXd ddx_d;  // 6 + N_J, zero when empty

  static Reference hold(const SystemState& s) {
    Reference r;
    r.p = s.p();
    r.q = UnitQuaternion(s.q());
    r.theta = s.theta();
    r.dtheta = VecXd::Zero(s.num_joints());
    return r;
  }
};

/// e = [p_ref − p; vec(q* ⊗ q_ref); θ_ref − θ] with the error quaternion on the w ≥ 0 hemisphere,
/// ė = [ṗ_ref − ṗ; ω_ref − ω_body; θ̇_ref − θ̇].
inline std::pair<VecXd, VecXd> error_vectors(const SystemState& s, const Reference& ref) {
  const int nj = s.num_joints();
  if (ref.theta.size() != nj) throw DimensionError("reference joint vector has wrong dimension");
  VecXd e(6 + nj), de(6 + nj);
  Quaterniond qe = qmul(conjugate(s.q()), ref.q.value());
  if (qe.w < 0.0) qe = {-qe.w, -qe.v};
  e << ref.p - s.p(), qe.v, ref.theta - s.theta();
  const VecXd dtheta_ref = ref.dtheta.size() ? ref.dtheta : VecXd::Zero(nj);
  de << ref.dp - s.dp(), ref.omega_body - s.omega_body(), dtheta_ref - s.dtheta();
  return {e, de};
}

struct ControlOutput {
  VecXd nu;     // 7 + N_J virtual acceleration
  VecXd tau;    // 7 + N_J generalized force
  VecXd f_b;    // 6 + N_J body force
  VecXd f_mot;  // N_M thrusts then N_J joint torques
};

/// Least-squares inverse of the allocation matrix; rank below 4 + N_J is uncontrollable.
inline MatXd allocation_inverse(const Model& model) {
  const MatXd A = motor_allocation(model);
  Eigen::JacobiSVD<MatXd> svd(A);
  const VecXd& sv = svd.singularValues();
  const double cut = sv.size() ? 1e-10 * sv[0] : 0.0;
  const int rank = static_cast<int>((sv.array() > cut).count());
  if (rank < 4 + model.num_joints())
    throw ControllabilityError("allocation matrix has rank " + std::to_string(rank) + ", need " +
                               std::to_string(4 + model.num_joints()));
  return pseudo_inverse(A);
}

inline ControlOutput computed_torque(const Model& model, const SystemState& s, const Reference& ref,
                                     const Gains& gains, CoriolisMethod method = CoriolisMethod::Mixed) {
  const int nj = s.num_joints();
  gains.validate(nj);
  const auto [e, de] = error_vectors(s, ref);
  VecXd v = gains.kv.cwiseProduct(de) + gains.kp.cwiseProduct(e);
  if (ref.ddx_d.size()) v += ref.ddx_d;
  const MatXd MF = force_mapping(s.x);
  ControlOutput out;
  out.nu = MF * v;
  out.tau = mass_matrix(model, s.x) * out.nu + coriolis_h(model, s.x, s.dx, method) + gravity_vector(model, s.x);
  out.f_b = pseudo_inverse(MF) * out.tau;
  out.f_mot = allocation_inverse(model) * out.f_b;
  return out;
}

/// Shifts all thrusts by a common offset to leave [0, k_t P²], then clamps; joint torques clamp to ±P.
inline VecXd saturate_motor_forces(const Model& model, VecXd f_mot) {
  const int nm = model.num_motors();
  const double peak = model.params.actuators.prop_peak;
  if (nm > 0) {
    VecXd fmax(nm);
    for (int i = 0; i < nm; ++i) fmax[i] = model.params.motors[std::size_t(i)].k_t * peak * peak;
    auto f = f_mot.head(nm);
    double shift = std::max(0.0, -f.minCoeff());
    const double over = (f.array() + shift - fmax.array()).maxCoeff();
    if (over > 0.0) shift -= over;
    f.array() += shift;
    f = f.cwiseMax(0.0).cwiseMin(fmax);
  }
  const double jp = model.params.actuators.joint_peak;
  auto tj = f_mot.tail(model.num_joints());
  tj = tj.cwiseMax(-jp).cwiseMin(jp);
  return f_mot;
}

/// Motor thrusts and joint torques holding the state at rest.
inline VecXd trim_hover(const Model& model, const SystemState& s) {
  const VecXd g = gravity_vector(model, s.x);
  const VecXd f_b = pseudo_inverse(force_mapping(s.x)) * g;
  const VecXd f_mot = allocation_inverse(model) * f_b;
  const VecXd resid = motor_allocation(model) * f_mot - f_b;
  if (resid.norm() > 1e-8 * std::max(1.0, f_b.norm()))
    throw ControllabilityError("hover trim infeasible: required body wrench is outside the allocation range");
  if (model.num_motors() > 0 && f_mot.head(model.num_motors()).minCoeff() < 0.0)
    throw ControllabilityError("hover trim infeasible: a motor would need negative thrust");
  return f_mot;
}

}  // namespace amdyn
