#pragma once

// A runnable simulation described by one config file: model paths, options,
// initial state, optional controller and a setpoint schedule.

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "amdyn/config.hpp"
#include "amdyn/sim.hpp"

namespace amdyn {

struct Scenario {
  std::string name;
  std::string urdf_path;
  std::string model_path;
  std::unique_ptr<Model> model;  // stable address, commanders keep a reference
  SimOptions options;
  SystemState initial;
  bool start_at_trim = false;
  bool controller = false;
  Gains gains;
  Reference reference;
  Schedule schedule;
  unsigned long seed = 42;
};

/// Builds a scenario from `doc`; `urdf` and `model` paths are relative to the file.
/// A non-empty `urdf_override` replaces the `urdf` key.
inline Scenario make_scenario(const ConfigDoc& doc, const std::string& name = "", const std::string& urdf_override = "") {
  Scenario sc;
  sc.name = name;
  const auto urdf = doc.get_string("", "urdf");
  if (!urdf && urdf_override.empty()) throw ParseError("scenario is missing 'urdf'");
  sc.urdf_path = urdf_override.empty() ? resolve_path(doc, *urdf) : urdf_override;
  if (auto m = doc.get_string("", "model")) sc.model_path = resolve_path(doc, *m);
  sc.model = std::make_unique<Model>(Model{load_urdf(sc.urdf_path), {}});
  if (!sc.model_path.empty()) apply_model_params(ConfigDoc::load(sc.model_path), sc.model->params);
  apply_model_params(doc, sc.model->params);
  sc.model->params.validate();
  if (auto s = doc.get_double("", "seed")) sc.seed = static_cast<unsigned long>(*s);

  auto& o = sc.options;
  if (auto v = doc.get_double("simulation", "dt")) o.dt = *v;
  if (auto v = doc.get_double("simulation", "duration")) o.duration = *v;
  if (auto v = doc.get_string("simulation", "integrator")) o.integrator = parse_integrator(*v);
  if (auto v = doc.get_string("simulation", "method")) o.method = parse_method(*v);
  if (auto v = doc.get_double("simulation", "dt_c")) o.dt_c = *v;
  if (auto v = doc.get_bool("simulation", "actuator_lag")) o.actuator_lag = *v;
  if (auto v = doc.get_bool("simulation", "start_at_trim")) sc.start_at_trim = *v;
  if (!(o.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(o.duration >= 0.0)) throw ValidationError("duration must be non-negative");

  const int nj = sc.model->num_joints();
  sc.initial = SystemState::at_rest(nj);
  const Vec3d p0 = doc.get_vec3("initial", "p").value_or(Vec3d::Zero());
  const UnitQuaternion q0 = get_orientation(doc, "initial").value_or(UnitQuaternion());
  const VecXd th0 = doc.get_vector("initial", "theta", nj).value_or(VecXd::Zero(nj));
  sc.initial = SystemState::make(p0, q0, th0);
  if (auto v = doc.get_vec3("initial", "dp")) sc.initial.dx.head<3>() = *v;
  if (auto v = doc.get_vec3("initial", "omega_body")) sc.initial.set_omega_body(*v);
  if (auto v = doc.get_vector("initial", "dtheta", nj)) sc.initial.dx.tail(nj) = *v;

  sc.controller = doc.get_bool("controller", "enabled").value_or(false);
  sc.gains = get_gains(doc, nj).value_or(default_gains(nj));
  sc.reference = Reference::hold(sc.initial);
  if (auto v = doc.get_vec3("reference", "p")) sc.reference.p = *v;
  if (auto q = get_orientation(doc, "reference")) sc.reference.q = *q;
  if (auto v = doc.get_vector("reference", "theta", nj)) sc.reference.theta = *v;
  sc.schedule = doc.schedule();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  namespace fs = std::filesystem;
  return make_scenario(ConfigDoc::load(path), fs::path(path).stem().string());
}

/// Initial actuator outputs: hover trim when requested, zero otherwise.
inline ActuatorBank initial_bank(const Scenario& sc) {
  if (!sc.start_at_trim) return ActuatorBank::zero(*sc.model);
  return bank_from_forces(*sc.model, trim_hover(*sc.model, sc.initial));
}

inline Commander scenario_commander(const Scenario& sc) {
  if (sc.controller) return closed_loop(*sc.model, sc.schedule, sc.reference, sc.gains, sc.options.method);
  return open_loop(*sc.model, sc.schedule);
}

/// Response to one step of a reference channel.
struct TrackingStep {
  std::string channel;
  double t_step = 0.0;
  double t_end = 0.0;  // next setpoint change on the channel, or end of run
  double from = 0.0;
  double to = 0.0;
  std::optional<double> settle_time;  // from t_step until the error stays within the band
  double overshoot = 0.0;             // beyond the target, as a fraction of the step size
  double final_error = 0.0;
};

/// Tracked quantity of a reference channel, or nothing for channels that are not references.
inline std::optional<double> tracked_value(const std::string& channel, const SystemState& s) {
  if (channel == "ref_x") return s.p()[0];
  if (channel == "ref_y") return s.p()[1];
  if (channel == "ref_z") return s.p()[2];
  const Vec3d rpy = to_roll_pitch_yaw(UnitQuaternion(s.q()));
  if (channel == "ref_roll") return rpy[0];
  if (channel == "ref_pitch") return rpy[1];
  if (channel == "ref_yaw") return rpy[2];
  if (channel.rfind("ref_theta_", 0) == 0) {
    const int j = std::stoi(channel.substr(10)) - 1;
    if (j >= 0 && j < s.num_joints()) return s.theta()[j];
  }
  return std::nullopt;
}

/// Settle time of every step setpoint change, with a band of `band` times the step size.
inline std::vector<TrackingStep> tracking_report(const Scenario& sc, const Trajectory& tr, double band = 0.05) {
  std::vector<TrackingStep> out;
  if (tr.samples.empty()) return out;
  const double t_last = tr.samples.back().t;
  for (const auto& ch : sc.schedule.channels()) {
    const auto start = tracked_value(ch, SystemState::make(sc.reference.p, sc.reference.q, sc.reference.theta));
    if (!start) continue;
    const auto& rows = sc.schedule.rows(ch);
    double prev = *start;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& e = rows[i];
      const double from = prev;
      prev = e.value;
      if (e.ramp || e.value == from) continue;
      TrackingStep st{ch, e.t, i + 1 < rows.size() ? rows[i + 1].t : t_last, from, e.value, std::nullopt, 0.0, 0.0};
      const double size = std::abs(e.value - from);
      const double sign = e.value > from ? 1.0 : -1.0;
      double last_out = -1.0;
      bool any = false;
      for (const auto& smp : tr.samples) {
        if (smp.t < e.t - 1e-12 || smp.t > st.t_end + 1e-12) continue;
        const double y = *tracked_value(ch, smp.state);
        const double err = y - e.value;
        if (std::abs(err) > band * size) last_out = smp.t;
        st.overshoot = std::max(st.overshoot, sign * err / size);
        st.final_error = err;
        any = true;
      }
      if (any && last_out < st.t_end - 1e-12) st.settle_time = std::max(0.0, last_out - e.t);
      out.push_back(st);
    }
  }
  return out;
}

inline void print_tracking_report(std::ostream& os, const std::vector<TrackingStep>& steps, double band = 0.05) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "tracking report (settling band %.0f%% of step)\n", 100.0 * band);
  os << buf;
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "  %-12s t=%6.3f  %+.4f -> %+.4f  ", s.channel.c_str(), s.t_step, s.from, s.to);
    os << buf;
    if (s.settle_time)
      std::snprintf(buf, sizeof buf, "settled in %.3f s", *s.settle_time);
    else
      std::snprintf(buf, sizeof buf, "not settled by t=%.3f", s.t_end);
    os << buf;
    std::snprintf(buf, sizeof buf, "  overshoot %.1f%%  final error %+.2e\n", 100.0 * s.overshoot, s.final_error);
    os << buf;
  }
}

}  // namespace amdyn
