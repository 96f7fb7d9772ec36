#pragma once

// Euler-Lagrange dynamics M(x)ẍ + C(x,ẋ)ẋ + g(x) = f_x of the floating-base
// multibody. Partial derivatives come from forward-mode duals.

#include <string>
#include <vector>

#include "amdyn/common.hpp"
#include "amdyn/dual.hpp"
#include "amdyn/kinematics.hpp"
#include "amdyn/model.hpp"

namespace amdyn {

enum class CoriolisMethod { Christoffel, Energy, Mixed };

inline const char* to_string(CoriolisMethod m) {
  switch (m) {
    case CoriolisMethod::Christoffel: return "christoffel";
    case CoriolisMethod::Energy: return "energy";
    case CoriolisMethod::Mixed: return "mixed";
  }
  return "mixed";
}

inline CoriolisMethod parse_method(const std::string& s) {
  if (s == "christoffel") return CoriolisMethod::Christoffel;
  if (s == "energy") return CoriolisMethod::Energy;
  if (s == "mixed") return CoriolisMethod::Mixed;
  throw ValidationError("unknown method '" + s + "' (christoffel, energy, mixed)");
}

/// Φ^W = R Φ Rᵀ.
template <class T>
Mat3<T> world_inertia(const Mat3<T>& R, const Mat3d& phi) {
  return R.lazyProduct(phi.template cast<T>()).lazyProduct(R.transpose());
}

/// M = Σ m_i J_tᵀ J_t + J_ωᵀ Θ_i J_ω  (= J_Wᵀ M_L J_W).
template <class P, class T>
MatX<T> mass_matrix(const Model& model, const VecX<T>& x) {
  const auto& tree = model.tree;
  const auto bj = body_jacobians<P, T>(tree, x);
  MatX<T> M = MatX<T>::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < bj.size(); ++i) {
    const TreeNode& body = tree.node(tree.bodies()[i]);
    const MatX<T> theta = P::theta_block(model.params.nu, world_inertia<T>(bj[i].R, body.inertia));
    M += T(body.mass) * bj[i].Jt.transpose().lazyProduct(bj[i].Jt);
    M += bj[i].Jw.transpose().lazyProduct(theta.lazyProduct(bj[i].Jw));
  }
  return M;
}

/// Σ ½ m_i |v_i|² + ½ ω_iᵀ Θ_i ω_i, summed per body without assembling M.
template <class P, class T>
T kinetic_energy(const Model& model, const VecX<T>& x, const VecX<T>& dx) {
  const auto& tree = model.tree;
  const auto bj = body_jacobians<P, T>(tree, x);
  T e(0.0);
  for (std::size_t i = 0; i < bj.size(); ++i) {
    const TreeNode& body = tree.node(tree.bodies()[i]);
    const Vec3<T> v = bj[i].Jt.lazyProduct(dx);
    const VecX<T> w = bj[i].Jw.lazyProduct(dx);
    const MatX<T> theta = P::theta_block(model.params.nu, world_inertia<T>(bj[i].R, body.inertia));
    e += T(0.5 * body.mass) * v.dot(v) + T(0.5) * w.dot(theta.lazyProduct(w));
  }
  return e;
}

/// E_pot = −Σ m_i g₀ · p_{W→B_i}.
template <class P, class T>
T potential_energy(const Model& model, const VecX<T>& x) {
  const auto& tree = model.tree;
  const auto bj = body_jacobians<P, T>(tree, x);
  const Vec3<T> g0 = model.params.gravity.template cast<T>();
  T e(0.0);
  for (std::size_t i = 0; i < bj.size(); ++i) e -= T(tree.node(tree.bodies()[i]).mass) * g0.dot(bj[i].p);
  return e;
}

inline double kinetic_energy(const Model& model, const SystemState& s) {
  return kinetic_energy<QuaternionBase, double>(model, s.x, s.dx);
}
inline double potential_energy(const Model& model, const SystemState& s) {
  return potential_energy<QuaternionBase, double>(model, s.x);
}
inline MatXd mass_matrix(const Model& model, const VecXd& x) { return mass_matrix<QuaternionBase, double>(model, x); }

namespace detail {

using D1 = Dual<double>;
using D2 = Dual<Dual<double>>;

inline VecX<D1> seed(const VecXd& x, const VecXd& dir) {
  VecX<D1> out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = D1(x[i], dir[i]);
  return out;
}

inline VecX<D1> seed_unit(const VecXd& x, Eigen::Index k) {
  VecX<D1> out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = D1(x[i], i == k ? 1.0 : 0.0);
  return out;
}

inline MatXd tangent(const MatX<D1>& m) {
  MatXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j).d;
  return out;
}

}  // namespace detail

/// ∂M/∂x_k for every k, one dual pass each.
template <class P = QuaternionBase>
std::vector<MatXd> mass_matrix_partials(const Model& model, const VecXd& x) {
  std::vector<MatXd> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k)
    out.push_back(detail::tangent(mass_matrix<P, detail::D1>(model, detail::seed_unit(x, k))));
  return out;
}

/// Ṁ = Σ_k ∂M/∂x_k ẋ_k as a single directional derivative.
template <class P = QuaternionBase>
MatXd mass_matrix_rate(const Model& model, const VecXd& x, const VecXd& dx) {
  return detail::tangent(mass_matrix<P, detail::D1>(model, detail::seed(x, dx)));
}

/// C_ij = ½ Σ_k (∂_k M_ij + ∂_j M_ik − ∂_i M_jk) ẋ_k.
template <class P = QuaternionBase>
MatXd coriolis_christoffel(const Model& model, const VecXd& x, const VecXd& dx) {
  const auto dM = mass_matrix_partials<P>(model, x);
  const Eigen::Index n = x.size();
  MatXd C = MatXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double c = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        c += 0.5 * (dM[std::size_t(k)](i, j) + dM[std::size_t(j)](i, k) - dM[std::size_t(i)](j, k)) * dx[k];
      C(i, j) = c;
    }
  return C;
}

/// h = (∂²E_kin/∂x∂ẋ) ẋ − ∂E_kin/∂x, differentiating the scalar kinetic energy.
template <class P = QuaternionBase>
VecXd coriolis_energy_h(const Model& model, const VecXd& x, const VecXd& dx) {
  using detail::D1;
  using detail::D2;
  const Eigen::Index n = x.size();
  VecXd h(n);
  VecX<D2> xs(n), dxs(n);
  for (Eigen::Index j = 0; j < n; ++j) xs[j] = D2(D1(x[j], dx[j]), D1(0.0, 0.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) dxs[j] = D2(D1(dx[j], 0.0), D1(i == j ? 1.0 : 0.0, 0.0));
    const D2 e = kinetic_energy<P, D2>(model, xs, dxs);
    const VecX<D1> dxi = dx.cast<D1>();
    const D1 ex = kinetic_energy<P, D1>(model, detail::seed_unit(x, i), dxi);
    h[i] = e.d.d - ex.d;
  }
  return h;
}

/// h = Ṁẋ − ½ [ẋᵀ ∂_k M ẋ]_k.
template <class P = QuaternionBase>
VecXd coriolis_mixed_h(const Model& model, const VecXd& x, const VecXd& dx) {
  VecXd h = mass_matrix_rate<P>(model, x, dx) * dx;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const MatXd dM = detail::tangent(mass_matrix<P, detail::D1>(model, detail::seed_unit(x, k)));
    h[k] -= 0.5 * dx.dot(dM * dx);
  }
  return h;
}

template <class P = QuaternionBase>
VecXd coriolis_h(const Model& model, const VecXd& x, const VecXd& dx, CoriolisMethod method) {
  switch (method) {
    case CoriolisMethod::Christoffel: return coriolis_christoffel<P>(model, x, dx) * dx;
    case CoriolisMethod::Energy: return coriolis_energy_h<P>(model, x, dx);
    case CoriolisMethod::Mixed: break;
  }
  return coriolis_mixed_h<P>(model, x, dx);
}

/// g = ∂E_pot/∂x.
template <class P = QuaternionBase>
VecXd gravity_vector(const Model& model, const VecXd& x) {
  VecXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k)
    g[k] = potential_energy<P, detail::D1>(model, detail::seed_unit(x, k)).d;
  return g;
}

struct SystemMatrices {
  MatXd M;
  MatXd C;  // filled by the Christoffel method only
  VecXd h;  // lumped Coriolis vector C ẋ
  VecXd g;
};

inline SystemMatrices system_matrices(const Model& model, const SystemState& s,
                                      CoriolisMethod method = CoriolisMethod::Mixed) {
  SystemMatrices out;
  out.M = mass_matrix(model, s.x);
  if (method == CoriolisMethod::Christoffel) {
    out.C = coriolis_christoffel(model, s.x, s.dx);
    out.h = out.C * s.dx;
  } else {
    out.h = coriolis_h(model, s.x, s.dx, method);
  }
  out.g = gravity_vector(model, s.x);
  return out;
}

/// M_F = blockdiag(R, 2Gᵀ, I_{N_J}); maps body forces [f, τ, f_J] to generalized forces.
inline MatXd force_mapping(const VecXd& x) {
  const int nj = static_cast<int>(x.size()) - 7;
  if (nj < 0) throw DimensionError("state too short for a quaternion base");
  const Quaterniond q = QuaternionBase::quaternion<double>(x);
  MatXd MF = MatXd::Zero(x.size(), 6 + nj);
  MF.block<3, 3>(0, 0) = to_rotation_matrix(q);
  MF.block<4, 3>(3, 3) = 2.0 * g_matrix(q).transpose();
  MF.bottomRightCorner(nj, nj).setIdentity();
  return MF;
}

/// Columns [n_i; r_i × n_i + (k_p/k_t) s_i n_i; 0] per motor, then identity for the joints.
inline MatXd motor_allocation(const Model& model) {
  const int nj = model.num_joints(), nm = model.num_motors();
  MatXd A = MatXd::Zero(6 + nj, nm + nj);
  for (int i = 0; i < nm; ++i) {
    const Motor& m = model.params.motors[static_cast<std::size_t>(i)];
    A.block<3, 1>(0, i) = m.axis;
    A.block<3, 1>(3, i) = m.position.cross(m.axis) + (m.k_p / m.k_t) * m.spin * m.axis;
  }
  A.bottomRightCorner(nj, nj).setIdentity();
  return A;
}

/// Thrust magnitudes k_t ω² from squared rotor speeds (rpm²).
inline VecXd motor_thrusts(const Model& model, const VecXd& omega_sq) {
  if (omega_sq.size() != model.num_motors()) throw DimensionError("one rotor speed per motor expected");
  VecXd f(omega_sq.size());
  for (Eigen::Index i = 0; i < omega_sq.size(); ++i) {
    if (omega_sq[i] < 0.0) throw DomainError("negative squared rotor speed");
    f[i] = model.params.motors[std::size_t(i)].k_t * omega_sq[i];
  }
  return f;
}

/// Body forces [f; τ; f_J] in the base frame from rotor speeds² and joint torques.
inline VecXd propulsion_forces(const Model& model, const VecXd& omega_sq, const VecXd& joint_torque) {
  if (joint_torque.size() != model.num_joints()) throw DimensionError("one torque per joint expected");
  VecXd u(model.num_motors() + model.num_joints());
  u << motor_thrusts(model, omega_sq), joint_torque;
  return motor_allocation(model) * u;
}

/// PWM variant: ω = P·u with u clamped to [0, 1]. Clamped entries are reported in `warnings`.
inline VecXd propulsion_forces_pwm(const Model& model, const VecXd& pwm, const VecXd& joint_torque,
                                   std::vector<std::string>* warnings = nullptr) {
  VecXd w2(pwm.size());
  for (Eigen::Index i = 0; i < pwm.size(); ++i) {
    double u = pwm[i];
    if (u < 0.0 || u > 1.0) {
      if (warnings) warnings->push_back("motor " + std::to_string(i + 1) + ": PWM " + std::to_string(u) + " clamped");
      u = std::clamp(u, 0.0, 1.0);
    }
    const double w = model.params.actuators.prop_peak * u;
    w2[i] = w * w;
  }
  return propulsion_forces(model, w2, joint_torque);
}

/// Solves M y = b with a Cholesky factorization, regularizing the diagonal once on failure.
inline VecXd solve_mass(const MatXd& M, const VecXd& b) {
  Eigen::LLT<MatXd> llt(M);
  if (llt.info() != Eigen::Success) {
    const double eps = 1e-12 * M.trace() / static_cast<double>(M.rows());
    llt.compute(M + eps * MatXd::Identity(M.rows(), M.cols()));
    if (llt.info() != Eigen::Success) throw SolverError("mass matrix is not positive definite");
  }
  VecXd y = llt.solve(b);
  if (!y.allFinite()) throw SolverError("mass matrix solve produced non-finite values");
  return y;
}

/// ẍ = M⁻¹(f_x − Cẋ − g).
inline VecXd forward_dynamics(const Model& model, const SystemState& s, const VecXd& fx,
                              CoriolisMethod method = CoriolisMethod::Mixed) {
  if (fx.size() != s.x.size()) throw DimensionError("generalized force has wrong dimension");
  const MatXd M = mass_matrix(model, s.x);
  return solve_mass(M, fx - coriolis_h(model, s.x, s.dx, method) - gravity_vector(model, s.x));
}

/// f_x = Mẍ + Cẋ + g.
inline VecXd inverse_dynamics(const Model& model, const SystemState& s, const VecXd& ddx,
                              CoriolisMethod method = CoriolisMethod::Mixed) {
  if (ddx.size() != s.x.size()) throw DimensionError("acceleration has wrong dimension");
  return mass_matrix(model, s.x) * ddx + coriolis_h(model, s.x, s.dx, method) + gravity_vector(model, s.x);
}

}  // namespace amdyn
