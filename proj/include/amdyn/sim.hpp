#pragma once

// Fixed-step simulation of the constrained system with first-order actuator
// lag. Actuators update first, their forces are held over the step, and the
// force mapping is re-evaluated at every integrator stage.

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "amdyn/common.hpp"
#include "amdyn/config.hpp"
#include "amdyn/constraint.hpp"
#include "amdyn/control.hpp"
#include "amdyn/dynamics.hpp"

namespace amdyn {

enum class Integrator { Euler, SemiImplicit, RK4 };

inline const char* to_string(Integrator i) {
  switch (i) {
    case Integrator::Euler: return "euler";
    case Integrator::SemiImplicit: return "semi-implicit";
    case Integrator::RK4: return "rk4";
  }
  return "rk4";
}

inline Integrator parse_integrator(const std::string& s) {
  if (s == "euler") return Integrator::Euler;
  if (s == "semi-implicit") return Integrator::SemiImplicit;
  if (s == "rk4") return Integrator::RK4;
  throw ValidationError("unknown integrator '" + s + "' (euler, semi-implicit, rk4)");
}

/// Actuator outputs: rotor speeds (rpm) and joint torques (N·m).
struct ActuatorBank {
  VecXd rpm;
  VecXd torque;

  static ActuatorBank zero(const Model& m) { return {VecXd::Zero(m.num_motors()), VecXd::Zero(m.num_joints())}; }

  /// Thrusts k_t ω² followed by joint torques.
  VecXd motor_forces(const Model& m) const {
    VecXd f(rpm.size() + torque.size());
    f << motor_thrusts(m, rpm.cwiseAbs2()), torque;
    return f;
  }
  VecXd body_forces(const Model& m) const { return propulsion_forces(m, rpm.cwiseAbs2(), torque); }
};

/// Propeller inputs in [0, 1] and joint torque commands in N·m.
struct Commands {
  VecXd prop;
  VecXd joint;
};

/// y' = y + (1 − e^{−dt/T})(K u − y), or y' = K u without lag.
inline ActuatorBank step_actuators(const Model& model, const ActuatorBank& bank, const Commands& cmd, double dt,
                                   bool lag = true) {
  const auto& a = model.params.actuators;
  if (cmd.prop.size() != model.num_motors() || cmd.joint.size() != model.num_joints())
    throw DimensionError("command vector has wrong dimension");
  const VecXd prop_target = a.prop_peak * cmd.prop.cwiseMax(0.0).cwiseMin(1.0);
  const VecXd joint_target = cmd.joint.cwiseMax(-a.joint_peak).cwiseMin(a.joint_peak);
  if (!lag) return {prop_target, joint_target};
  const double kp = 1.0 - std::exp(-dt / a.prop_time_constant);
  const double kj = 1.0 - std::exp(-dt / a.joint_time_constant);
  return {bank.rpm + kp * (prop_target - bank.rpm), bank.torque + kj * (joint_target - bank.torque)};
}

/// Actuator outputs that produce the given thrusts and torques in steady state.
inline ActuatorBank bank_from_forces(const Model& model, const VecXd& f_mot) {
  ActuatorBank b = ActuatorBank::zero(model);
  for (int i = 0; i < model.num_motors(); ++i)
    b.rpm[i] = std::sqrt(std::max(0.0, f_mot[i]) / model.params.motors[std::size_t(i)].k_t);
  b.torque = f_mot.tail(model.num_joints());
  return b;
}

/// Commands that drive the actuators toward the given thrusts and torques.
inline Commands commands_from_forces(const Model& model, const VecXd& f_mot) {
  const ActuatorBank b = bank_from_forces(model, f_mot);
  return {b.rpm / model.params.actuators.prop_peak, b.torque};
}

struct SimOptions {
  double dt = 1.0 / 240.0;
  double duration = 0.0;
  Integrator integrator = Integrator::RK4;
  double dt_c = 0.0;  // constraint timescale, 0 selects dt
  bool actuator_lag = true;
  CoriolisMethod method = CoriolisMethod::Mixed;

  double constraint_timescale() const { return dt_c > 0.0 ? dt_c : dt; }
};

struct Derivative {
  VecXd dx;
  VecXd ddx;
};

inline Derivative state_derivative(const Model& model, const SystemState& s, const VecXd& f_body, double dt_c,
                                   CoriolisMethod method) {
  const auto cd = constrained_derivatives(model, s, force_mapping(s.x) * f_body, dt_c, unity_constraint(), method);
  return {cd.dx, cd.ddx};
}

/// ẏ = f(y) stencils on a flat vector.
using OdeRhs = std::function<VecXd(const VecXd&)>;

inline VecXd euler_step(const OdeRhs& f, const VecXd& y, double dt) { return y + dt * f(y); }

inline VecXd rk4_step(const OdeRhs& f, const VecXd& y, double dt) {
  const VecXd k1 = f(y);
  const VecXd k2 = f(y + 0.5 * dt * k1);
  const VecXd k3 = f(y + 0.5 * dt * k2);
  const VecXd k4 = f(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Advances the state by one step with body forces held constant.
inline SystemState integrate(const Model& model, const SystemState& s, const VecXd& f_body, double dt,
                             Integrator integ, double dt_c, CoriolisMethod method) {
  const Eigen::Index n = s.x.size();
  // y = [x, ẋ]
  const OdeRhs rhs = [&](const VecXd& y) {
    SystemState t;
    t.x = y.head(n);
    t.dx = y.tail(n);
    const Derivative d = state_derivative(model, t, f_body, dt_c, method);
    VecXd out(2 * n);
    out << d.dx, d.ddx;
    return out;
  };
  SystemState out = s;
  switch (integ) {
    case Integrator::SemiImplicit: {
      const Derivative d = state_derivative(model, s, f_body, dt_c, method);
      out.dx = s.dx + dt * d.ddx;
      out.x = s.x + dt * project_velocity(model, s.x, out.dx, dt_c);
      return out;
    }
    case Integrator::Euler:
    case Integrator::RK4: break;
  }
  VecXd y(2 * n);
  y << s.x, s.dx;
  y = integ == Integrator::Euler ? euler_step(rhs, y, dt) : rk4_step(rhs, y, dt);
  out.x = y.head(n);
  out.dx = y.tail(n);
  return out;
}

struct StepResult {
  SystemState state;
  ActuatorBank bank;
};

/// Actuator update, then one integrator step under the new (held) forces.
inline StepResult step(const Model& model, const SystemState& s, const ActuatorBank& bank, const Commands& cmd,
                       const SimOptions& opt, double t = 0.0) {
  if (!(opt.dt > 0.0)) throw DomainError("time step must be positive");
  StepResult r;
  r.bank = step_actuators(model, bank, cmd, opt.dt, opt.actuator_lag);
  try {
    r.state = integrate(model, s, r.bank.body_forces(model), opt.dt, opt.integrator, opt.constraint_timescale(),
                        opt.method);
  } catch (const SolverError& e) {
    throw IntegrationError(std::string("solver failure: ") + e.what(), t);
  }
  if (!r.state.finite()) throw IntegrationError("non-finite state", t);
  return r;
}

struct Sample {
  double t = 0.0;
  SystemState state;
  VecXd f_mot;  // thrusts then joint torques in effect over the step that produced this state
  double phi = 0.0;
};

struct Trajectory {
  int num_joints = 0;
  int num_motors = 0;
  std::vector<Sample> samples;

  double max_abs_phi() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, std::abs(s.phi));
    return m;
  }
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_header(std::ostream& os, int nj, int nm) {
  os << "t,p_x,p_y,p_z,q_w,q_x,q_y,q_z";
  for (int j = 1; j <= nj; ++j) os << ",theta_" << j;
  os << ",dp_x,dp_y,dp_z,dq_w,dq_x,dq_y,dq_z";
  for (int j = 1; j <= nj; ++j) os << ",dtheta_" << j;
  for (int m = 1; m <= nm; ++m) os << ",f_mot_" << m;
  os << ",phi_unity\n";
}

inline void write_csv_row(std::ostream& os, const Sample& s, int nm) {
  os << format_double(s.t);
  for (Eigen::Index i = 0; i < s.state.x.size(); ++i) os << ',' << format_double(s.state.x[i]);
  for (Eigen::Index i = 0; i < s.state.dx.size(); ++i) os << ',' << format_double(s.state.dx[i]);
  for (int m = 0; m < nm; ++m) os << ',' << format_double(s.f_mot[m]);
  os << ',' << format_double(s.phi) << '\n';
}

inline void write_csv(std::ostream& os, const Trajectory& tr) {
  write_csv_header(os, tr.num_joints, tr.num_motors);
  for (const auto& s : tr.samples) write_csv_row(os, s, tr.num_motors);
}

/// Commands as a function of time and state.
using Commander = std::function<Commands(double t, const SystemState& s)>;

/// Setpoints `motor_i` (input in [0, 1]) and `joint_i` (N·m) read from the schedule, zero by default.
inline Commander open_loop(const Model& model, const Schedule& schedule) {
  return [&model, schedule](double t, const SystemState&) {
    Commands c{VecXd::Zero(model.num_motors()), VecXd::Zero(model.num_joints())};
    for (int i = 0; i < model.num_motors(); ++i) c.prop[i] = schedule.value("motor_" + std::to_string(i + 1), t, 0.0);
    for (int j = 0; j < model.num_joints(); ++j) c.joint[j] = schedule.value("joint_" + std::to_string(j + 1), t, 0.0);
    return c;
  };
}

/// Reference at time t: `ref_x|y|z`, `ref_roll|pitch|yaw` (rad) and `ref_theta_i` override `base`.
/// Ramp segments also set the reference velocities.
inline Reference scheduled_reference(const Reference& base, const Schedule& schedule, double t) {
  Reference r = base;
  const char* axes[] = {"ref_x", "ref_y", "ref_z"};
  for (int i = 0; i < 3; ++i) {
    r.p[i] = schedule.value(axes[i], t, base.p[i]);
    r.dp[i] = schedule.rate(axes[i], t);
  }
  if (schedule.has("ref_roll") || schedule.has("ref_pitch") || schedule.has("ref_yaw")) {
    const Vec3d rpy0 = to_roll_pitch_yaw(base.q);
    VecXd e = VecXd::Zero(6);
    Vec3d rates;
    const char* angles[] = {"ref_roll", "ref_pitch", "ref_yaw"};
    for (int i = 0; i < 3; ++i) {
      e[3 + i] = schedule.value(angles[i], t, rpy0[i]);
      rates[i] = schedule.rate(angles[i], t);
    }
    r.q = from_roll_pitch_yaw(e[3], e[4], e[5]);
    r.omega_body = r.q.rotation_matrix().transpose() * (EulerBase::rate_matrix<double>(e) * rates);
  }
  r.dtheta = VecXd::Zero(r.theta.size());
  for (Eigen::Index j = 0; j < r.theta.size(); ++j) {
    const std::string ch = "ref_theta_" + std::to_string(j + 1);
    r.theta[j] = schedule.value(ch, t, base.theta[j]);
    r.dtheta[j] = schedule.rate(ch, t);
  }
  return r;
}

/// Computed-torque loop: reference from the schedule, saturated motor forces turned into commands.
/// While the `controller` channel is below 0.5 the open-loop `motor_i`/`joint_i` setpoints apply instead.
inline Commander closed_loop(const Model& model, const Schedule& schedule, const Reference& base, const Gains& gains,
                             CoriolisMethod method = CoriolisMethod::Mixed) {
  gains.validate(model.num_joints());
  allocation_inverse(model);  // throws if uncontrollable
  Commander manual = open_loop(model, schedule);
  return [&model, schedule, base, gains, method, manual](double t, const SystemState& s) {
    if (schedule.value("controller", t, 1.0) < 0.5) return manual(t, s);
    const Reference r = scheduled_reference(base, schedule, t);
    const ControlOutput u = computed_torque(model, s, r, gains, method);
    return commands_from_forces(model, saturate_motor_forces(model, u.f_mot));
  };
}

/// Runs a fixed-step simulation and keeps the trajectory, complete or not.
class Simulator {
 public:
  Simulator(const Model& model, SimOptions options, Commander commander)
      : model_(model), opt_(options), commander_(std::move(commander)) {
    if (!(opt_.dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(opt_.duration >= 0.0)) throw ValidationError("duration must be non-negative");
  }

  /// Number of steps: ⌈duration/dt⌉.
  long num_steps() const { return static_cast<long>(std::ceil(opt_.duration / opt_.dt - 1e-9)); }

  const Trajectory& run(const SystemState& initial, const ActuatorBank& bank0) {
    if (initial.x.size() != model_.dim() || initial.dx.size() != model_.dim())
      throw DimensionError("initial state has wrong dimension");
    traj_ = Trajectory{model_.num_joints(), model_.num_motors(), {}};
    complete_ = false;
    SystemState s = initial;
    ActuatorBank bank = bank0;
    record(0.0, s, bank);
    const long n = num_steps();
    traj_.samples.reserve(static_cast<std::size_t>(n + 1));
    for (long k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * opt_.dt;
      try {
        const Commands c = commander_(t, s);
        auto r = step(model_, s, bank, c, opt_, t);
        s = std::move(r.state);
        bank = std::move(r.bank);
      } catch (const IntegrationError& e) {
        throw IntegrationError(std::string(e.what()) + " at t = " + format_double(t) + "\n" + post_mortem(), t);
      } catch (const Error& e) {
        throw IntegrationError(std::string(e.what()) + " at t = " + format_double(t) + "\n" + post_mortem(), t);
      }
      record(static_cast<double>(k + 1) * opt_.dt, s, bank);
    }
    complete_ = true;
    return traj_;
  }

  const Trajectory& trajectory() const { return traj_; }
  bool complete() const { return complete_; }

  /// The last 10 recorded samples as CSV.
  std::string post_mortem() const {
    std::ostringstream os;
    write_csv_header(os, traj_.num_joints, traj_.num_motors);
    const std::size_t n = traj_.samples.size();
    for (std::size_t i = n > 10 ? n - 10 : 0; i < n; ++i) write_csv_row(os, traj_.samples[i], traj_.num_motors);
    return os.str();
  }

 private:
  void record(double t, const SystemState& s, const ActuatorBank& bank) {
    traj_.samples.push_back({t, s, bank.motor_forces(model_), constraint_residuals(s).phi});
  }

  const Model& model_;
  SimOptions opt_;
  Commander commander_;
  Trajectory traj_;
  bool complete_ = false;
};

}  // namespace amdyn
