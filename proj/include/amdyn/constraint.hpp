#pragma once

// Holonomic constraints φ(x) = 0 enforced by projecting velocity and
// acceleration through M^{-1/2} B⁺ with B = A M^{-1/2}, A = ∂φ/∂x.

#include <cmath>
#include <functional>

#include "amdyn/common.hpp"
#include "amdyn/dynamics.hpp"

namespace amdyn {

/// Residual, Jacobian and velocity-squared term of a set of holonomic constraints.
struct ConstraintSet {
  std::function<VecXd(const VecXd& x)> phi;
  std::function<MatXd(const VecXd& x)> jacobian;
  /// [ẋᵀ ∂²φ_k/∂x² ẋ]_k
  std::function<VecXd(const VecXd& x, const VecXd& dx)> curvature;
};

struct UnityResidual {
  double phi = 0.0;
  double phi_dot = 0.0;
};

/// φ = ‖q‖ − 1 and φ̇ = qᵀq̇ / ‖q‖.
inline UnityResidual constraint_residuals(const SystemState& s) {
  const Vec4d q = s.x.segment<4>(3);
  const double n = q.norm();
  if (!(n > 0.0)) throw DomainError("zero quaternion in state");
  return {n - 1.0, q.dot(s.dx.segment<4>(3)) / n};
}

/// The quaternion unity constraint on x = [p, q, θ].
inline ConstraintSet unity_constraint() {
  ConstraintSet c;
  c.phi = [](const VecXd& x) {
    VecXd r(1);
    r[0] = x.segment<4>(3).norm() - 1.0;
    return r;
  };
  c.jacobian = [](const VecXd& x) {
    const Vec4d q = x.segment<4>(3);
    const double n = q.norm();
    if (!(n > 0.0)) throw DomainError("zero quaternion in state");
    MatXd A = MatXd::Zero(1, x.size());
    A.block<1, 4>(0, 3) = (q / n).transpose();
    return A;
  };
  c.curvature = [](const VecXd& x, const VecXd& dx) {
    const Vec4d q = x.segment<4>(3);
    const double n = q.norm();
    const Vec4d qh = q / n;
    const Vec4d dq = dx.segment<4>(3);
    // ∂²φ/∂q² = (I − q̂q̂ᵀ)/‖q‖
    VecXd r(1);
    r[0] = (dq.squaredNorm() - std::pow(qh.dot(dq), 2)) / n;
    return r;
  };
  return c;
}

/// Symmetric inverse square root by eigendecomposition, eigenvalues floored at 1e-12 λ_max.
inline MatXd inverse_sqrt_spd(const MatXd& M) {
  Eigen::SelfAdjointEigenSolver<MatXd> es(0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) throw SolverError("eigendecomposition of the mass matrix failed");
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || !std::isfinite(lmax)) throw SolverError("mass matrix has no positive eigenvalue");
  const VecXd inv = es.eigenvalues().cwiseMax(1e-12 * lmax).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Moore-Penrose inverse by SVD with singular values below 1e-10 σ_max treated as zero.
inline MatXd pseudo_inverse(const MatXd& B, double rel_cutoff = 1e-10) {
  Eigen::JacobiSVD<MatXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecXd& sv = svd.singularValues();
  const double cut = sv.size() ? rel_cutoff * sv[0] : 0.0;
  VecXd inv = VecXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct ConstrainedDerivative {
  VecXd dx;   // corrected velocity ẋ_c
  VecXd ddx;  // corrected acceleration v̇_c
  VecXd a;    // unconstrained acceleration
};

/// ẋ_c = v + S B⁺(−A v − φ/dt_c) and v̇_c = a + S B⁺(b_v − A a − φ̇/dt_c),
/// S = M^{-1/2}, b_v = −ẋᵀ(∂²φ/∂x²)ẋ, φ̇ = A v.
inline ConstrainedDerivative constrained_derivatives(const Model& model, const SystemState& s, const VecXd& fx,
                                                     double dt_c, const ConstraintSet& cs = unity_constraint(),
                                                     CoriolisMethod method = CoriolisMethod::Mixed) {
  if (!(dt_c > 0.0)) throw DomainError("constraint timescale must be positive");
  if (fx.size() != s.x.size()) throw DimensionError("generalized force has wrong dimension");
  const MatXd M = mass_matrix(model, s.x);
  ConstrainedDerivative out;
  out.a = solve_mass(M, fx - coriolis_h(model, s.x, s.dx, method) - gravity_vector(model, s.x));
  const MatXd S = inverse_sqrt_spd(M);
  const MatXd A = cs.jacobian(s.x);
  const MatXd P = S * pseudo_inverse(A * S);
  const VecXd phi = cs.phi(s.x);
  const VecXd phi_dot = A * s.dx;
  const VecXd b_v = -cs.curvature(s.x, s.dx);
  out.dx = s.dx + P * (-(A * s.dx) - phi / dt_c);
  out.ddx = out.a + P * (b_v - A * out.a - phi_dot / dt_c);
  return out;
}

/// ẋ_c = v + S B⁺(−A v − φ/dt_c) for an arbitrary velocity v at coordinates x.
inline VecXd project_velocity(const Model& model, const VecXd& x, const VecXd& v, double dt_c,
                              const ConstraintSet& cs = unity_constraint()) {
  if (!(dt_c > 0.0)) throw DomainError("constraint timescale must be positive");
  const MatXd S = inverse_sqrt_spd(mass_matrix(model, x));
  const MatXd A = cs.jacobian(x);
  return v + S * pseudo_inverse(A * S) * (-(A * v) - cs.phi(x) / dt_c);
}

}  // namespace amdyn
