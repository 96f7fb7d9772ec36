#include "support.hpp"

#include <sstream>

#include "amdyn/scenario.hpp"

using namespace amdyn;
using namespace amdyn::test;

namespace {

constexpr double kDt = 1.0 / 240.0;

Commander constant(const Commands& c) {
  return [c](double, const SystemState&) { return c; };
}

Commands idle(const Model& m) { return {VecXd::Zero(m.num_motors()), VecXd::Zero(m.num_joints())}; }

Trajectory run(const Model& m, const SystemState& s0, double duration, Integrator integ, Commander cmd,
               ActuatorBank bank, bool lag = true) {
  SimOptions o;
  o.duration = duration;
  o.integrator = integ;
  o.actuator_lag = lag;
  Simulator sim(m, o, std::move(cmd));
  return sim.run(s0, bank);
}

std::string csv_of(const Trajectory& tr) {
  std::ostringstream os;
  write_csv(os, tr);
  return os.str();
}

}  // namespace

TEST(Sim, ActuatorStepResponseAfterOneTimeConstant) {
  const Model m = bundled("am_2link");  // T = 0.1 s props, 0.05 s joints
  ActuatorBank b = ActuatorBank::zero(m);
  Commands c{VecXd::Ones(4), VecXd::Constant(2, 5.0)};
  for (int i = 0; i < 24; ++i) b = step_actuators(m, b, c, 0.1 / 24);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(b.rpm[i], 4500.0 * (1.0 - std::exp(-1.0)), 1e-9);
  EXPECT_NEAR(b.rpm[0] / 4500.0, 0.632, 5e-4);
  // two joint time constants have elapsed
  EXPECT_NEAR(b.torque[0], 5.0 * (1.0 - std::exp(-2.0)), 1e-12);
  // the update is exact, so the step count does not matter
  ActuatorBank one = step_actuators(m, ActuatorBank::zero(m), c, 0.1);
  EXPECT_NEAR(one.rpm[0], b.rpm[0], 1e-9);
}

TEST(Sim, ActuatorCommandsClampWithoutLag) {
  const Model m = bundled("am_2link");
  Commands c{VecXd::Constant(4, 1.7), VecXd::Constant(2, -40.0)};
  c.prop[1] = -0.3;
  const ActuatorBank b = step_actuators(m, ActuatorBank::zero(m), c, kDt, false);
  EXPECT_EQ(b.rpm[0], 4500.0);
  EXPECT_EQ(b.rpm[1], 0.0);
  EXPECT_EQ(b.torque[0], -12.0);
  EXPECT_THROW(step_actuators(m, b, Commands{VecXd::Zero(3), VecXd::Zero(2)}, kDt), DimensionError);
}

TEST(Sim, BankForcesRoundTrip) {
  const Model m = bundled("am_2link");
  VecXd f(6);
  f << 10, 20, 30, 40, 0.5, -0.7;
  const ActuatorBank b = bank_from_forces(m, f);
  EXPECT_LT((b.motor_forces(m) - f).norm(), 1e-12);
  const Commands c = commands_from_forces(m, f);
  EXPECT_LT((step_actuators(m, ActuatorBank::zero(m), c, kDt, false).motor_forces(m) - f).norm(), 1e-12);
}

TEST(Sim, RestWithoutGravityIsUnchanged) {
  Model m = bundled("am_2link");
  m.params.gravity.setZero();
  for (Integrator integ : {Integrator::Euler, Integrator::SemiImplicit, Integrator::RK4}) {
    const SystemState s0 = SystemState::make(Vec3d(1, 2, 3), from_roll_pitch_yaw(0.1, 0.2, 0.3), VecXd::Ones(2));
    const auto tr = run(m, s0, 0.25, integ, constant(idle(m)), ActuatorBank::zero(m));
    EXPECT_EQ(tr.samples.back().state.x, s0.x);
    EXPECT_EQ(tr.samples.back().state.dx, s0.dx);
  }
}

TEST(Sim, HoverAtTrimHoldsPosition) {
  for (const char* name : {"uav_0link", "am_1link", "am_2link"}) {
    const Model m = bundled(name);
    const SystemState s0 = SystemState::make(Vec3d(0, 0, 1), UnitQuaternion(), VecXd::Zero(m.num_joints()));
    const VecXd trim = trim_hover(m, s0);
    const auto tr = run(m, s0, 1.0, Integrator::RK4, constant(commands_from_forces(m, trim)), bank_from_forces(m, trim));
    EXPECT_LE((tr.samples.back().state.p() - s0.p()).norm(), 1e-3) << name;
  }
  // per-motor thrust on the bare quad is a quarter of the weight
  const Model q = bundled("uav_0link");
  const VecXd trim = trim_hover(q, SystemState::at_rest(0));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(trim[i], 6.0 * 9.81 / 4, 1e-9);
}

TEST(Sim, FreeFallOneSecond) {
  const Model m = bundled("uav_0link");
  const SystemState s0 = SystemState::make(Vec3d(0, 0, 10), UnitQuaternion(), VecXd());
  const int n = 240;
  // rk4 integrates the quadratic exactly
  const auto rk = run(m, s0, 1.0, Integrator::RK4, constant(idle(m)), ActuatorBank::zero(m));
  ASSERT_EQ(rk.samples.size(), std::size_t(n + 1));
  EXPECT_NEAR(rk.samples.back().state.p()[2], 10.0 - 4.905, 1e-12);
  EXPECT_NEAR(rk.samples.back().state.dp()[2], -9.81, 1e-12);
  // explicit Euler lands on its discrete solution g dt² n(n−1)/2, 0.0204 m short of 4.905
  const auto eu = run(m, s0, 1.0, Integrator::Euler, constant(idle(m)), ActuatorBank::zero(m));
  EXPECT_NEAR(eu.samples.back().state.p()[2], 10.0 - 9.81 * kDt * kDt * n * (n - 1) / 2, 1e-10);
  // semi-implicit Euler uses the updated velocity: n(n+1)/2
  const auto si = run(m, s0, 1.0, Integrator::SemiImplicit, constant(idle(m)), ActuatorBank::zero(m));
  EXPECT_NEAR(si.samples.back().state.p()[2], 10.0 - 9.81 * kDt * kDt * n * (n + 1) / 2, 1e-10);
}

TEST(Sim, StencilsOnLinearDecay) {
  const OdeRhs f = [](const VecXd& y) { return VecXd(-y); };
  const VecXd y0 = VecXd::Ones(1);
  EXPECT_NEAR(euler_step(f, y0, 0.1)[0], 0.9, 1e-15);
  EXPECT_NEAR(rk4_step(f, y0, 0.1)[0], std::exp(-0.1), 1e-6);
  EXPECT_NEAR(rk4_step(f, y0, 0.1)[0], 0.904837, 1e-6);
}

TEST(Sim, Rk4ExactOnQuadratic) {
  const OdeRhs f = [](const VecXd& y) {
    VecXd d(2);
    d << y[1], -9.81;
    return d;
  };
  VecXd y(2);
  y << 3.0, 1.5;
  const VecXd out = rk4_step(f, y, 0.7);
  EXPECT_NEAR(out[0], 3.0 + 1.5 * 0.7 - 0.5 * 9.81 * 0.49, 1e-15);
  EXPECT_NEAR(out[1], 1.5 - 9.81 * 0.7, 1e-15);
}

TEST(Sim, Rk4DriftsLessThanEulerOnTorqueFreeSpin) {
  Model m = bundled("uav_0link");
  m.params.gravity.setZero();
  SystemState s0 = SystemState::at_rest(0);
  s0.set_omega_body(Vec3d(0.3, 2.0, 0.5));
  auto drift = [&](Integrator integ) {
    const auto tr = run(m, s0, 2.0, integ, constant(idle(m)), ActuatorBank::zero(m), false);
    const double e0 = kinetic_energy(m, s0);
    double d = 0.0;
    for (const auto& smp : tr.samples) d = std::max(d, std::abs(kinetic_energy(m, smp.state) - e0));
    return d / e0;
  };
  const double rk = drift(Integrator::RK4), eu = drift(Integrator::Euler);
  EXPECT_LE(rk, eu);
  EXPECT_LT(rk, 1e-5);
}

TEST(Sim, PerStepEnergyChangeWithinBudget) {
  // zero force and gravity: |ΔE_kin| per step ≤ 1e-6 J at 240 Hz
  Model m = bundled("am_2link");
  m.params.gravity.setZero();
  std::mt19937_64 rng(71);
  const SystemState s0 = manifold_state(rng, 2);
  const auto tr = run(m, s0, 1.0, Integrator::RK4, constant(idle(m)), ActuatorBank::zero(m), false);
  double worst = 0.0;
  for (std::size_t i = 1; i < tr.samples.size(); ++i)
    worst = std::max(worst, std::abs(kinetic_energy(m, tr.samples[i].state) - kinetic_energy(m, tr.samples[i - 1].state)));
  EXPECT_LE(worst, 1e-6);
}

TEST(Sim, ZeroDurationKeepsInitialState) {
  const Model m = bundled("am_1link");
  std::mt19937_64 rng(72);
  const SystemState s0 = manifold_state(rng, 1);
  const auto tr = run(m, s0, 0.0, Integrator::RK4, constant(idle(m)), ActuatorBank::zero(m));
  ASSERT_EQ(tr.samples.size(), 1u);
  EXPECT_EQ(tr.samples[0].state.x, s0.x);
  EXPECT_EQ(tr.samples[0].state.dx, s0.dx);
  EXPECT_EQ(tr.samples[0].t, 0.0);
}

TEST(Sim, SampleCountIsCeilOfDurationOverDt) {
  const Model m = bundled("uav_0link");
  const auto tr = run(m, SystemState::at_rest(0), 0.01, Integrator::Euler, constant(idle(m)), ActuatorBank::zero(m));
  EXPECT_EQ(tr.samples.size(), 4u);  // ⌈2.4⌉ + 1
  const auto exact = run(m, SystemState::at_rest(0), 0.5, Integrator::Euler, constant(idle(m)), ActuatorBank::zero(m));
  EXPECT_EQ(exact.samples.size(), 121u);
}

TEST(Sim, DeterministicTrajectories) {
  auto once = [] {
    Scenario sc = load_scenario(data_path("scenarios/validation.cfg"));
    sc.options.duration = 1.0;
    Simulator sim(*sc.model, sc.options, scenario_commander(sc));
    return csv_of(sim.run(sc.initial, initial_bank(sc)));
  };
  const std::string a = once(), b = once();
  EXPECT_EQ(a, b);
  EXPECT_GT(a.size(), 10000u);
}

TEST(Sim, NoHiddenRenormalization) {
  const Model m = bundled("am_1link");
  SystemState s0 = SystemState::at_rest(1);
  s0.x.segment<4>(3) = Vec4d(1.0005, 0.01, 0, 0);
  std::vector<SystemState> seen;
  Commander spy = [&](double, const SystemState& s) {
    seen.push_back(s);
    return idle(m);
  };
  SimOptions o;
  o.duration = 5 * kDt;
  Simulator sim(m, o, spy);
  const auto& tr = sim.run(s0, ActuatorBank::zero(m));
  ASSERT_EQ(seen.size(), 5u);
  for (std::size_t k = 0; k < seen.size(); ++k) {
    EXPECT_EQ(seen[k].x, tr.samples[k].state.x);
    EXPECT_EQ(seen[k].dx, tr.samples[k].state.dx);
    const SystemState direct = integrate(m, tr.samples[k].state, ActuatorBank::zero(m).body_forces(m), kDt,
                                         Integrator::RK4, kDt, CoriolisMethod::Mixed);
    EXPECT_EQ(direct.x, tr.samples[k + 1].state.x);
  }
  // the residual contracts through the dynamics, not through a normalization
  EXPECT_NE(tr.samples[1].phi, 0.0);
  EXPECT_LT(std::abs(tr.samples[1].phi), std::abs(tr.samples[0].phi));
}

TEST(Sim, FailuresKeepPartialTrajectory) {
  const Model m = bundled("uav_0link");
  SimOptions o;
  o.duration = 1.0;
  Commander bomb = [&](double t, const SystemState&) {
    if (t > 0.1) throw DomainError("commander failed");
    return idle(m);
  };
  Simulator sim(m, o, bomb);
  try {
    sim.run(SystemState::at_rest(0), ActuatorBank::zero(m));
    FAIL() << "expected an integration error";
  } catch (const IntegrationError& e) {
    EXPECT_GT(e.time(), 0.1);
    EXPECT_NE(std::string(e.what()).find("commander failed"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("t,p_x"), std::string::npos);
  }
  EXPECT_FALSE(sim.complete());
  EXPECT_EQ(sim.trajectory().samples.size(), 26u);

  SystemState bad = SystemState::at_rest(0);
  bad.dx[0] = std::nan("");
  Simulator sim2(m, o, constant(idle(m)));
  EXPECT_THROW(sim2.run(bad, ActuatorBank::zero(m)), IntegrationError);
  EXPECT_EQ(sim2.trajectory().samples.size(), 1u);
}

TEST(Sim, OptionChecks) {
  const Model m = bundled("uav_0link");
  SimOptions o;
  o.dt = 0.0;
  EXPECT_THROW(Simulator(m, o, constant(idle(m))), ValidationError);
  o.dt = kDt;
  o.duration = -1.0;
  EXPECT_THROW(Simulator(m, o, constant(idle(m))), ValidationError);
  o.duration = 1.0;
  Simulator sim(m, o, constant(idle(m)));
  EXPECT_THROW(sim.run(SystemState::at_rest(1), ActuatorBank::zero(m)), DimensionError);
  SimOptions bad;
  bad.dt = -1.0;
  EXPECT_THROW(step(m, SystemState::at_rest(0), ActuatorBank::zero(m), idle(m), bad), DomainError);
  EXPECT_EQ(parse_integrator("semi-implicit"), Integrator::SemiImplicit);
  EXPECT_THROW(parse_integrator("leapfrog"), ValidationError);
  EXPECT_EQ(o.constraint_timescale(), kDt);
}

TEST(Sim, CsvLayout) {
  const Model m = bundled("am_2link");
  const auto tr = run(m, SystemState::at_rest(2), 2 * kDt, Integrator::RK4, constant(idle(m)), ActuatorBank::zero(m));
  const std::string csv = csv_of(tr);
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  EXPECT_EQ(header,
            "t,p_x,p_y,p_z,q_w,q_x,q_y,q_z,theta_1,theta_2,dp_x,dp_y,dp_z,dq_w,dq_x,dq_y,dq_z,dtheta_1,dtheta_2,"
            "f_mot_1,f_mot_2,f_mot_3,f_mot_4,phi_unity");
  int rows = 0;
  while (std::getline(is, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  }
  EXPECT_EQ(rows, 3);
}

TEST(Schedule, StepsAndRamps) {
  const ConfigDoc doc = ConfigDoc::parse("[schedule]\n0.0, ref_z, 1\n1.0, ref_z, 3, ramp\n2.0, ref_z, 0, step\n"
                                         "0.5, motor_1, 0.4\n");
  const Schedule& s = doc.schedule();
  EXPECT_EQ(s.value("ref_z", 0.0, 9.0), 1.0);
  EXPECT_NEAR(s.value("ref_z", 0.25, 9.0), 1.5, 1e-15);
  EXPECT_NEAR(s.rate("ref_z", 0.25), 2.0, 1e-15);
  EXPECT_EQ(s.value("ref_z", 1.0, 9.0), 3.0);
  EXPECT_EQ(s.rate("ref_z", 1.5), 0.0);
  EXPECT_EQ(s.value("ref_z", 2.5, 9.0), 0.0);
  EXPECT_EQ(s.value("motor_1", 0.2, 0.0), 0.0);
  EXPECT_EQ(s.value("motor_1", 0.7, 0.0), 0.4);
  EXPECT_EQ(s.value("missing", 1.0, 7.0), 7.0);
  EXPECT_EQ(s.rows("ref_z").size(), 3u);
  EXPECT_THROW(s.rows("missing"), LookupError);
}

TEST(Schedule, RampFromFallbackBeforeFirstRow) {
  Schedule s;
  s.add({2.0, "ref_x", 4.0, true});
  EXPECT_NEAR(s.value("ref_x", 1.0, 0.0), 2.0, 1e-15);
  EXPECT_NEAR(s.rate("ref_x", 1.0), 2.0, 1e-15);
}

TEST(Schedule, MalformedRows) {
  EXPECT_THROW(ConfigDoc::parse("[schedule]\n1.0, ref_z, 1, linear\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("[schedule]\n1.0, ref_z\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("[schedule]\n1.0, ref_z, 1, ramp, extra\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("[schedule]\n-1.0, ref_z, 1\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("[schedule]\nsoon, ref_z, 1\n"), ParseError);
  try {
    ConfigDoc::parse("# header\n[schedule]\n0, a, 1\n1.0, ref_z, 1, linear\n");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Config, ParsesSectionsAndValues) {
  const ConfigDoc doc = ConfigDoc::parse("gravity = 0 0 -9.81  # comment\nnu = 2\n[simulation]\ndt = 1/240\n"
                                         "lag = yes\n");
  EXPECT_EQ(*doc.get_vec3("", "gravity"), Vec3d(0, 0, -9.81));
  EXPECT_EQ(*doc.get_double("simulation", "dt"), 1.0 / 240.0);
  EXPECT_TRUE(*doc.get_bool("simulation", "lag"));
  EXPECT_FALSE(doc.get_double("simulation", "missing").has_value());
  EXPECT_THROW(ConfigDoc::parse("[a]\nk = 1\nk = 2\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("[broken\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("novalue\n"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("g = 1 2\n").get_vec3("", "g"), ParseError);
  EXPECT_THROW(ConfigDoc::parse("b = maybe\n").get_bool("", "b"), ParseError);
}

TEST(Config, ModelParamsValidation) {
  ModelParams p;
  apply_model_params(ConfigDoc::parse("[motor.1]\nspin = 1\nk_t = 1e-6\nk_p = 1e-8\n"), p);
  EXPECT_EQ(p.motors.size(), 1u);
  EXPECT_NO_THROW(p.validate());
  EXPECT_THROW(apply_model_params(ConfigDoc::parse("[motor.2]\nspin = 1\nk_t = 1\nk_p = 0\n"), p), ParseError);
  EXPECT_THROW(apply_model_params(ConfigDoc::parse("[motor.1]\nspin = 1\nk_t = 1\n"), p), ParseError);
  ModelParams q;
  apply_model_params(ConfigDoc::parse("nu = -1\n"), q);
  EXPECT_THROW(q.validate(), ValidationError);
  ModelParams r;
  apply_model_params(ConfigDoc::parse("[motor.1]\nspin = 2\nk_t = 1\nk_p = 0\n"), r);
  EXPECT_THROW(r.validate(), ValidationError);
  EXPECT_THROW(load_model_params("/nonexistent.cfg"), ParseError);
}

TEST(Scenario, BundledScenariosLoad) {
  for (const char* name : {"validation", "backflip", "control"}) {
    const Scenario sc = load_scenario(data_path(std::string("scenarios/") + name + ".cfg"));
    EXPECT_EQ(sc.name, name);
    EXPECT_TRUE(sc.controller);
    EXPECT_TRUE(sc.start_at_trim);
    EXPECT_EQ(sc.options.dt, 1.0 / 240.0);
    EXPECT_EQ(sc.options.integrator, Integrator::RK4);
    EXPECT_NEAR(constraint_residuals(sc.initial).phi, 0.0, 1e-15);
  }
  EXPECT_THROW(make_scenario(ConfigDoc::parse("[simulation]\ndt = 0.01\n")), ParseError);
  const ConfigDoc doc = ConfigDoc::parse("[simulation]\ndt = 0\n");
  EXPECT_THROW(make_scenario(doc, "x", data_path("models/uav_0link.urdf")), ValidationError);
}

TEST(Scenario, ScheduledReferenceRampSetsRates) {
  Reference base;
  base.theta = VecXd::Zero(1);
  Schedule s;
  s.add({1.0, "ref_pitch", 1.0, true});
  s.add({1.0, "ref_theta_1", 0.5, true});
  const Reference r = scheduled_reference(base, s, 0.5);
  EXPECT_NEAR(to_roll_pitch_yaw(r.q)[1], 0.5, 1e-12);
  EXPECT_LT((r.omega_body - Vec3d(0, 1, 0)).norm(), 1e-12);
  EXPECT_NEAR(r.theta[0], 0.25, 1e-15);
  EXPECT_NEAR(r.dtheta[0], 0.5, 1e-15);
}

TEST(Scenario, TrackingReportOnSyntheticResponse) {
  Scenario sc;
  sc.reference.p = Vec3d(0, 0, 1);
  sc.reference.theta = VecXd::Zero(0);
  sc.schedule.add({0.0, "ref_z", 2.0, false});
  sc.schedule.add({0.0, "motor_1", 0.5, false});  // not a reference channel
  Trajectory tr;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.1 * k;
    Sample smp;
    smp.t = t;
    smp.state = SystemState::make(Vec3d(0, 0, 2.0 - std::exp(-t)), UnitQuaternion(), VecXd());
    tr.samples.push_back(smp);
  }
  const auto rep = tracking_report(sc, tr);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].channel, "ref_z");
  EXPECT_EQ(rep[0].from, 1.0);
  ASSERT_TRUE(rep[0].settle_time.has_value());
  // e^{-t} ≤ 0.05 first holds at t = 3.0 on the 0.1 s grid
  EXPECT_NEAR(*rep[0].settle_time, 2.9, 1e-12);
  EXPECT_LE(rep[0].overshoot, 0.0);
  std::ostringstream os;
  print_tracking_report(os, rep);
  EXPECT_NE(os.str().find("settled in 2.900 s"), std::string::npos);
}
