#pragma once

// Subcommands of the command-line front end. Each takes a RunConfig, writes
// artifacts to disk and reports to `out`/`err`, and returns the exit code.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amdyn/bench.hpp"
#include "amdyn/scenario.hpp"
#include "amdyn/symx/dynamics.hpp"
#include "amdyn/validate.hpp"

#if defined(__linux__)
#include <sched.h>
#endif

namespace amdyn::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kIntegrationFailure = 2, kValidationFailed = 3 };

struct RunConfig {
  std::string subcommand;
  std::string scenario;  // bundled name or path to a scenario file
  std::string model;     // bundled model name (urdf + sidecar config)
  std::string urdf;
  std::string config;
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<std::string> integrator;
  std::vector<std::string> methods;  // empty selects the default
  std::vector<std::string> parameterizations;
  unsigned long seed = 42;
  std::string output;
  // validate
  int states = 20;
  // codegen
  bool count_only = false;
  bool timing = true;
  // benchmark
  std::vector<std::string> models;
  std::size_t iterations = 2000;
  bool pin = false;
};

/// Directory holding `models/` and `scenarios/`: $AMDYN_DATA_DIR, else the compiled-in path.
inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("AMDYN_DATA_DIR"); env && *env) return env;
#ifdef AMDYN_DATA_DIR
  return AMDYN_DATA_DIR;
#else
  return std::filesystem::current_path();
#endif
}

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw ParseError(what + " '" + path + "' does not exist");
}

/// A path is used as given; a bare name refers to scenarios/<name>.cfg in the data directory.
inline std::string scenario_path(const std::string& s) {
  namespace fs = std::filesystem;
  if (s.find('/') != std::string::npos || fs::path(s).has_extension()) return s;
  return (data_dir() / "scenarios" / (s + ".cfg")).string();
}

struct ModelSource {
  std::string name;
  std::string urdf;
  std::string config;  // may be empty
};

inline ModelSource bundled_model(const std::string& name) {
  const auto dir = data_dir() / "models";
  ModelSource m{name, (dir / (name + ".urdf")).string(), (dir / (name + ".cfg")).string()};
  require_file(m.urdf, "model URDF");
  if (!std::filesystem::is_regular_file(m.config)) m.config.clear();
  return m;
}

/// --urdf/--config take precedence over --model; the default is `fallback`.
inline ModelSource model_source(const RunConfig& rc, const std::string& fallback) {
  if (!rc.urdf.empty()) {
    require_file(rc.urdf, "URDF file");
    if (!rc.config.empty()) require_file(rc.config, "config file");
    return {std::filesystem::path(rc.urdf).stem().string(), rc.urdf, rc.config};
  }
  return bundled_model(rc.model.empty() ? fallback : rc.model);
}

inline Model load(const ModelSource& m) { return load_model(m.urdf, m.config); }

/// Scenario from --scenario, or from --urdf/--config with the config read as a scenario file.
inline Scenario scenario_from(const RunConfig& rc, const std::string& fallback) {
  Scenario sc;
  if (!rc.scenario.empty() || rc.urdf.empty()) {
    const std::string path = scenario_path(rc.scenario.empty() ? fallback : rc.scenario);
    require_file(path, "scenario file");
    sc = load_scenario(path);
  } else {
    require_file(rc.urdf, "URDF file");
    ConfigDoc doc;
    if (!rc.config.empty()) {
      require_file(rc.config, "config file");
      doc = ConfigDoc::load(rc.config);
    }
    sc = make_scenario(doc, std::filesystem::path(rc.urdf).stem().string(), rc.urdf);
  }
  if (rc.dt) sc.options.dt = *rc.dt;
  if (rc.duration) sc.options.duration = *rc.duration;
  if (rc.integrator) sc.options.integrator = parse_integrator(*rc.integrator);
  if (!rc.methods.empty()) sc.options.method = parse_method(rc.methods.front());
  if (!(sc.options.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(sc.options.duration >= 0.0)) throw ValidationError("duration must be non-negative");
  return sc;
}

inline std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

inline void print_state(std::ostream& out, const Sample& s) {
  auto vec = [](const VecXd& v) {
    std::string r;
    for (Eigen::Index i = 0; i < v.size(); ++i) r += (i ? " " : "") + format_double(v[i]);
    return r;
  };
  out << "final state at t = " << format_double(s.t) << "\n"
      << "  p     = " << vec(s.state.p()) << "\n"
      << "  q     = " << vec(s.state.x.segment<4>(3)) << "\n"
      << "  theta = " << vec(s.state.theta()) << "\n"
      << "  rpy   = " << vec(to_roll_pitch_yaw(UnitQuaternion(s.state.q()))) << "\n";
}

struct RunOutcome {
  int code = kOk;
  Trajectory trajectory;
  bool complete = false;
};

/// Runs a scenario and writes its CSV; a failed run leaves the partial CSV ending in `# INCOMPLETE`.
inline RunOutcome run_and_write(const Scenario& sc, const std::string& csv_path, std::ostream& out, std::ostream& err) {
  RunOutcome r;
  Simulator sim(*sc.model, sc.options, scenario_commander(sc));
  std::string failure;
  try {
    sim.run(sc.initial, initial_bank(sc));
  } catch (const IntegrationError& e) {
    failure = e.what();
  }
  r.trajectory = sim.trajectory();
  r.complete = sim.complete();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw ParseError("cannot write '" + csv_path + "'");
  write_csv(csv, r.trajectory);
  if (!r.complete) {
    csv << "# INCOMPLETE: " << first_line(failure) << '\n';
    err << "integration failed: " << failure << '\n';
    r.code = kIntegrationFailure;
  }
  csv.close();
  out << "scenario " << sc.name << ": " << (r.trajectory.samples.size() - 1) << " steps of "
      << format_double(sc.options.dt) << " s (" << to_string(sc.options.integrator) << ", "
      << to_string(sc.options.method) << ")\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |phi| = %.3e\n", r.trajectory.max_abs_phi());
  out << buf;
  if (!r.trajectory.samples.empty()) print_state(out, r.trajectory.samples.back());
  out << "trajectory written to " << csv_path << (r.complete ? "" : " (incomplete)") << "\n";
  return r;
}

inline std::string default_csv(const Scenario& sc) { return (sc.name.empty() ? "trajectory" : sc.name) + ".csv"; }

inline int cmd_simulate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Scenario sc = scenario_from(rc, "validation");
  return run_and_write(sc, rc.output.empty() ? default_csv(sc) : rc.output, out, err).code;
}

/// Closed-loop run of a scenario (the bundled computed-torque demo by default) plus a tracking report.
inline int cmd_control(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  Scenario sc = scenario_from(rc, "control");
  sc.controller = true;
  const auto r = run_and_write(sc, rc.output.empty() ? default_csv(sc) : rc.output, out, err);
  print_tracking_report(out, tracking_report(sc, r.trajectory));
  return r.code;
}

inline int cmd_validate(const RunConfig& rc, std::ostream& out, std::ostream&) {
  const ModelSource src = model_source(rc, "am_2link");
  const Model model = load(src);
  const bool euler = !rc.parameterizations.empty() && symx::parse_parameterization(rc.parameterizations.front()) ==
                                                          symx::Parameterization::Euler;
  ValidationOptions o;
  o.seed = rc.seed;
  o.states = rc.states;
  ValidationReport rep;
  if (euler) {
    rep.model = src.name + " (euler)";
    rep.checks.push_back(check_gimbal_probe());
  } else {
    rep = validate_model(model, src.name, o);
  }
  print_report(out, rep);
  return rep.passed() ? kOk : kValidationFailed;
}

/// Writes `{function}.c` per matrix, a prototype header and op_counts.csv into the output directory.
inline int cmd_codegen(const RunConfig& rc, std::ostream& out, std::ostream&) {
  namespace fs = std::filesystem;
  const ModelSource src = model_source(rc, "am_2link");
  const Model model = load(src);
  const fs::path dir = rc.output.empty() ? fs::path("generated") : fs::path(rc.output);
  fs::create_directories(dir);
  std::vector<CoriolisMethod> methods;
  for (const auto& m : rc.methods.empty() ? std::vector<std::string>{"mixed"} : rc.methods)
    if (m == "all") methods = {CoriolisMethod::Christoffel, CoriolisMethod::Energy, CoriolisMethod::Mixed};
    else methods.push_back(parse_method(m));
  std::vector<symx::Parameterization> params;
  for (const auto& p : rc.parameterizations.empty() ? std::vector<std::string>{"quaternion"} : rc.parameterizations)
    if (p == "all") params = {symx::Parameterization::Quaternion, symx::Parameterization::Euler};
    else params.push_back(symx::parse_parameterization(p));

  std::ofstream csv(dir / "op_counts.csv", std::ios::binary);
  if (!csv) throw ParseError("cannot write into '" + dir.string() + "'");
  symx::write_op_count_header(csv);
  for (auto p : params)
    for (auto m : methods) {
      symx::SymbolicDynamics sd = symx::build_symbolic_dynamics(model, m, p);
      const symx::OpCountReport rep = symx::count_dynamics(sd, src.name, model.num_joints());
      symx::write_op_count_rows(csv, rep, rc.timing);
      out << src.name << " " << symx::to_string(p) << " " << to_string(m) << ": ";
      for (const auto& mc : rep.matrices) out << mc.matrix << " " << mc.ops.total() << " ops, ";
      out << "total " << rep.total() << "\n";
      if (rc.count_only) continue;
      std::string header = "/* " + src.name + " dynamics; in = [x, dx], out column-major */\n";
      std::string guard = symx::function_name(src.name, p, "dyn", m);
      for (auto& c : guard) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      header += "#ifndef " + guard + "_H\n#define " + guard + "_H\n\n";
      for (const auto& mc : rep.matrices) {
        const std::string fn = symx::function_name(src.name, p, mc.matrix, m);
        std::ofstream c(dir / (fn + ".c"), std::ios::binary);
        c << "/* " << mc.matrix << " of " << src.name << " (" << symx::to_string(p) << ", " << to_string(m)
          << "), " << mc.ops.total() << " operations */\n#include <math.h>\n\n"
          << symx::emit_code(*sd.graph, symx::cse(*sd.graph, mc.roots), fn);
        if (!c) throw ParseError("cannot write '" + (dir / (fn + ".c")).string() + "'");
        header += symx::emit_prototype(fn);
        out << "  wrote " << (dir / (fn + ".c")).string() << "\n";
      }
      header += "\n#endif\n";
      std::ofstream h(dir / (symx::function_name(src.name, p, "dyn", m) + ".h"), std::ios::binary);
      h << header;
    }
  out << "operation counts written to " << (dir / "op_counts.csv").string() << "\n";
  return kOk;
}

/// Pins the process to its first allowed CPU; returns false when unsupported.
inline bool pin_to_one_core() {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  if (sched_getaffinity(0, sizeof set, &set) != 0) return false;
  int cpu = 0;
  while (cpu < CPU_SETSIZE && !CPU_ISSET(cpu, &set)) ++cpu;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return sched_setaffinity(0, sizeof set, &set) == 0;
#else
  return false;
#endif
}

inline int cmd_benchmark(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.pin && !pin_to_one_core()) err << "warning: could not pin to one core\n";
  const std::vector<std::string> names =
      rc.models.empty() ? std::vector<std::string>{"uav_0link", "am_1link", "am_2link", "am_3link"} : rc.models;
  const CoriolisMethod method = rc.methods.empty() ? CoriolisMethod::Mixed : parse_method(rc.methods.front());
  std::vector<BenchmarkRow> rows;
  for (const auto& n : names) {
    const Model m = load(bundled_model(n));
    for (auto& r : benchmark_dynamics(m, n, rc.iterations, rc.seed, method)) rows.push_back(std::move(r));
  }
  std::ofstream file;
  if (!rc.output.empty()) {
    file.open(rc.output, std::ios::binary);
    if (!file) throw ParseError("cannot write '" + rc.output + "'");
  }
  std::ostream& csv = rc.output.empty() ? out : file;
  csv << "# " << platform_description() << ", method " << to_string(method) << "\n";
  write_benchmark_header(csv);
  for (const auto& r : rows) write_benchmark_row(csv, r);
  if (!rc.output.empty()) {
    bool increasing = true;
    for (std::size_t i = 2; i < rows.size(); ++i)
      if (rows[i].operation == rows[i - 2].operation && rows[i].timing.mean_s <= rows[i - 2].timing.mean_s)
        increasing = false;
    char buf[128];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-10s %-8s mean %9.2f us  min %9.2f us\n", r.model.c_str(), r.operation.c_str(),
                    r.timing.mean_s * 1e6, r.timing.min_s * 1e6);
      out << buf;
    }
    out << "mean times " << (increasing ? "increase" : "do not increase") << " with link count\n";
    out << "timings written to " << rc.output << "\n";
  }
  return kOk;
}

/// Dispatches on rc.subcommand and maps library errors to exit codes.
inline int run(const RunConfig& rc, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (rc.subcommand == "simulate") return cmd_simulate(rc, out, err);
    if (rc.subcommand == "validate") return cmd_validate(rc, out, err);
    if (rc.subcommand == "codegen") return cmd_codegen(rc, out, err);
    if (rc.subcommand == "benchmark") return cmd_benchmark(rc, out, err);
    if (rc.subcommand == "control") return cmd_control(rc, out, err);
    err << "error: unknown subcommand '" << rc.subcommand << "'\n";
    return kFailure;
  } catch (const IntegrationError& e) {
    err << "integration failed: " << e.what() << '\n';
    return kIntegrationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace amdyn::cli
