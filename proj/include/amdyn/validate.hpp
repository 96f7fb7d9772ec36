#pragma once

// Independent numerical oracles for the dynamics: central differences,
// round trips, cross-method agreement, free fall and energy conservation.

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "amdyn/sim.hpp"

namespace amdyn {

struct CheckResult {
  std::string name;
  double error = 0.0;      // measured maximum error
  double tolerance = 0.0;  // pass when error ≤ tolerance
  bool passed = false;
  std::string note;
};

struct ValidationReport {
  std::string model;
  std::vector<CheckResult> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

struct ValidationOptions {
  int states = 20;           // random states per check
  unsigned long seed = 42;
  double fd_step = 1e-6;
  double drift_duration = 2.0;
  double drift_tolerance = 1e-5;  // relative energy drift, passive rk4 at 240 Hz
};

/// Random state: p ∈ [−1, 1]³, uniform unit quaternion, θ ∈ [−π, π], velocities in [−1, 1].
inline SystemState random_state(std::mt19937_64& rng, int num_joints, bool with_velocity = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  VecXd th(num_joints);
  for (int j = 0; j < num_joints; ++j) th[j] = M_PI * u(rng);
  SystemState s = SystemState::make(Vec3d(u(rng), u(rng), u(rng)), UnitQuaternion(q[0], q[1], q[2], q[3]), th);
  if (with_velocity)
    for (Eigen::Index i = 0; i < s.dx.size(); ++i) s.dx[i] = u(rng);
  return s;
}

namespace detail {

inline CheckResult finish(std::string name, double err, double tol, std::string note = "") {
  return {std::move(name), err, tol, std::isfinite(err) && err <= tol, std::move(note)};
}

/// Coordinates with the quaternion block normalized, so finite differences see the rotation only.
inline VecXd normalized(VecXd x) {
  x.segment<4>(3).normalize();
  return x;
}

inline Vec3d vee(const Mat3d& W) { return 0.5 * Vec3d(W(2, 1) - W(1, 2), W(0, 2) - W(2, 0), W(1, 0) - W(0, 1)); }

}  // namespace detail

/// Jacobian columns against central differences of body positions and orientations.
inline CheckResult check_jacobian_fd(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  const double h = o.fd_step;
  for (int s = 0; s < o.states; ++s) {
    const VecXd x = random_state(rng, model.num_joints(), false).x;
    const auto bj = body_jacobians<QuaternionBase, double>(model.tree, x);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      VecXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const auto bp = body_jacobians<QuaternionBase, double>(model.tree, detail::normalized(xp));
      const auto bm = body_jacobians<QuaternionBase, double>(model.tree, detail::normalized(xm));
      for (std::size_t b = 0; b < bj.size(); ++b) {
        const Vec3d dp = (bp[b].p - bm[b].p) / (2.0 * h);
        const Vec3d dw = detail::vee((bp[b].R - bm[b].R) * bj[b].R.transpose()) / (2.0 * h);
        err = std::max(err, (dp - bj[b].Jt.col(k)).cwiseAbs().maxCoeff());
        err = std::max(err, (dw - bj[b].Jw.col(k).tail<3>()).cwiseAbs().maxCoeff());
      }
    }
  }
  return detail::finish("fd_jacobian", err, 1e-6);
}

/// M against the central-difference Hessian of E_kin in ẋ.
inline CheckResult check_mass_hessian_fd(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  const double h = 1e-3;  // E_kin is quadratic in ẋ, so the stencil is exact up to rounding
  for (int s = 0; s < o.states; ++s) {
    const SystemState st = random_state(rng, model.num_joints());
    const MatXd M = mass_matrix(model, st.x);
    const Eigen::Index n = st.x.size();
    auto E = [&](const VecXd& v) { return kinetic_energy<QuaternionBase, double>(model, st.x, v); };
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        VecXd a = st.dx, b = st.dx, c = st.dx, d = st.dx;
        a[i] += h; a[j] += h;
        b[i] += h; b[j] -= h;
        c[i] -= h; c[j] += h;
        d[i] -= h; d[j] -= h;
        const double fd = (E(a) - E(b) - E(c) + E(d)) / (4.0 * h * h);
        err = std::max(err, std::abs(fd - M(i, j)));
      }
  }
  return detail::finish("fd_hessian_mass", err, 1e-6);
}

/// g against the central-difference gradient of E_pot.
inline CheckResult check_gravity_fd(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  const double h = 1e-5;
  for (int s = 0; s < o.states; ++s) {
    const VecXd x = random_state(rng, model.num_joints(), false).x;
    const VecXd g = gravity_vector(model, x);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      VecXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (potential_energy<QuaternionBase, double>(model, xp) -
                         potential_energy<QuaternionBase, double>(model, xm)) / (2.0 * h);
      err = std::max(err, std::abs(fd - g[k]));
    }
  }
  return detail::finish("fd_gradient_gravity", err, 1e-7);
}

/// inverse(forward(f)) = f.
inline CheckResult check_round_trip(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int s = 0; s < o.states; ++s) {
    const SystemState st = random_state(rng, model.num_joints());
    VecXd f(st.x.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = u(rng);
    const VecXd back = inverse_dynamics(model, st, forward_dynamics(model, st, f));
    err = std::max(err, (back - f).cwiseAbs().maxCoeff());
  }
  return detail::finish("round_trip", err, 1e-8);
}

/// Unactuated system at rest: the base accelerates at g₀ and nothing rotates.
inline CheckResult check_free_fall(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  for (int s = 0; s < o.states; ++s) {
    const SystemState st = random_state(rng, model.num_joints(), false);
    const VecXd a = forward_dynamics(model, st, VecXd::Zero(st.x.size()));
    err = std::max(err, (a.head<3>() - model.params.gravity).cwiseAbs().maxCoeff());
  }
  return detail::finish("free_fall", err, 1e-10);
}

/// C·ẋ, h_energy and h_mixed agree elementwise.
inline CheckResult check_cross_method(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  for (int s = 0; s < o.states; ++s) {
    const SystemState st = random_state(rng, model.num_joints());
    const VecXd hc = coriolis_christoffel(model, st.x, st.dx) * st.dx;
    err = std::max(err, (hc - coriolis_energy_h(model, st.x, st.dx)).cwiseAbs().maxCoeff());
    err = std::max(err, (hc - coriolis_mixed_h(model, st.x, st.dx)).cwiseAbs().maxCoeff());
  }
  return detail::finish("cross_method", err, 1e-8);
}

/// (Ṁ − 2C) + (Ṁ − 2C)ᵀ = 0.
inline CheckResult check_skew(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  double err = 0.0;
  for (int s = 0; s < o.states; ++s) {
    const SystemState st = random_state(rng, model.num_joints());
    const MatXd N = mass_matrix_rate(model, st.x, st.dx) - 2.0 * coriolis_christoffel(model, st.x, st.dx);
    err = std::max(err, (N + N.transpose()).cwiseAbs().rowwise().sum().maxCoeff());
  }
  return detail::finish("skew_symmetry", err, 1e-8);
}

/// Relative change of E_kin + E_pot during an unactuated rk4 run.
inline CheckResult check_energy_drift(const Model& model, std::mt19937_64& rng, const ValidationOptions& o) {
  SystemState s0 = random_state(rng, model.num_joints(), false);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  s0.set_omega_body(Vec3d(u(rng), u(rng), u(rng)));
  s0.dx.head<3>() = Vec3d(u(rng), u(rng), u(rng));
  for (int j = 0; j < model.num_joints(); ++j) s0.dx[7 + j] = u(rng);
  SimOptions opt;
  opt.duration = o.drift_duration;
  opt.actuator_lag = false;
  const Commands idle{VecXd::Zero(model.num_motors()), VecXd::Zero(model.num_joints())};
  Simulator sim(model, opt, [idle](double, const SystemState&) { return idle; });
  try {
    sim.run(s0, ActuatorBank::zero(model));
  } catch (const IntegrationError& e) {
    return detail::finish("energy_drift", std::numeric_limits<double>::infinity(), o.drift_tolerance,
                          "diverged at t = " + format_double(e.time()));
  }
  const auto& tr = sim.trajectory();
  auto energy = [&](const SystemState& s) { return kinetic_energy(model, s) + potential_energy(model, s); };
  const double e0 = energy(s0);
  const double scale = std::max(1.0, kinetic_energy(model, s0));
  double err = 0.0;
  for (const auto& smp : tr.samples) err = std::max(err, std::abs(energy(smp.state) - e0) / scale);
  return detail::finish("energy_drift", err, o.drift_tolerance, "relative to max(1, initial E_kin)");
}

/// |det E_w| at pitch = 90°: the check passes when the singularity is detected.
inline CheckResult check_gimbal_probe() {
  const double det = std::abs(euler_rate_determinant(0.0, M_PI / 2.0, 0.0));
  CheckResult r = detail::finish("euler_gimbal_probe", det, 1e-12);
  r.note = r.passed ? "Euler rate matrix singular at pitch = 90 deg" : "singularity not detected";
  return r;
}

inline ValidationReport validate_model(const Model& model, const std::string& name, const ValidationOptions& o = {}) {
  ValidationReport rep;
  rep.model = name;
  std::mt19937_64 rng(o.seed);
  rep.checks.push_back(check_jacobian_fd(model, rng, o));
  rep.checks.push_back(check_mass_hessian_fd(model, rng, o));
  rep.checks.push_back(check_gravity_fd(model, rng, o));
  rep.checks.push_back(check_round_trip(model, rng, o));
  rep.checks.push_back(check_free_fall(model, rng, o));
  rep.checks.push_back(check_cross_method(model, rng, o));
  rep.checks.push_back(check_skew(model, rng, o));
  rep.checks.push_back(check_energy_drift(model, rng, o));
  return rep;
}

inline void print_report(std::ostream& os, const ValidationReport& r) {
  os << "model " << r.model << "\n";
  for (const auto& c : r.checks) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-4s %-22s max error %.3e  tolerance %.1e", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.error, c.tolerance);
    os << buf;
    if (!c.note.empty()) os << "  (" << c.note << ")";
    os << "\n";
  }
  os << (r.passed() ? "all checks passed" : "some checks FAILED") << "\n";
}

}  // namespace amdyn
