// amdyn: simulate, validate, codegen, benchmark and control front end.

#include <CLI11.hpp>

#include "amdyn/cli.hpp"

namespace {

using amdyn::cli::RunConfig;

void add_model_flags(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--model", rc.model, "Bundled model name (uav_0link, am_1link, am_2link, am_3link)");
  sub->add_option("--urdf", rc.urdf, "URDF file");
  sub->add_option("--config", rc.config, "Sidecar config file");
}

void add_run_flags(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--scenario", rc.scenario, "Bundled scenario name or scenario file");
  sub->add_option("--urdf", rc.urdf, "URDF file (with --config read as the scenario)");
  sub->add_option("--config", rc.config, "Scenario or sidecar config file");
  sub->add_option("--dt", rc.dt, "Time step in s")->check(CLI::PositiveNumber);
  sub->add_option("--duration", rc.duration, "Duration in s")->check(CLI::NonNegativeNumber);
  sub->add_option("--integrator", rc.integrator, "euler, semi-implicit or rk4");
  sub->add_option("--method", rc.methods, "christoffel, energy or mixed")->expected(1);
  sub->add_option("--output,-o", rc.output, "Trajectory CSV path");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;
  CLI::App app{"Quaternion-based dynamics of aerial manipulators"};
  app.require_subcommand(1);
  app.add_option("--seed", rc.seed, "Seed for randomized checks and benchmarks")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write its trajectory CSV");
  add_run_flags(sim, rc);

  auto* ctl = app.add_subcommand("control", "Run the closed-loop demo and report settle times");
  add_run_flags(ctl, rc);

  auto* val = app.add_subcommand("validate", "Run the oracle suite on a model");
  add_model_flags(val, rc);
  val->add_option("--parameterization", rc.parameterizations, "quaternion or euler")->expected(1);
  val->add_option("--states", rc.states, "Random states per check")->check(CLI::PositiveNumber)->capture_default_str();

  auto* gen = app.add_subcommand("codegen", "Emit C code and operation counts for M, C/h and g");
  add_model_flags(gen, rc);
  gen->add_option("--method", rc.methods, "christoffel, energy, mixed or all (repeatable)");
  gen->add_option("--parameterization", rc.parameterizations, "quaternion, euler or all (repeatable)");
  gen->add_option("--output,-o", rc.output, "Output directory");
  gen->add_flag("--count-only", rc.count_only, "Write op_counts.csv only");
  gen->add_flag("!--no-timing", rc.timing, "Leave the gen_seconds column empty");

  auto* bench = app.add_subcommand("benchmark", "Time forward and inverse dynamics");
  bench->add_option("--models", rc.models, "Bundled models (default: all four)");
  bench->add_option("--iterations", rc.iterations, "Iterations per operation")->capture_default_str();
  bench->add_option("--method", rc.methods, "christoffel, energy or mixed")->expected(1);
  bench->add_option("--output,-o", rc.output, "Timing CSV path (default: standard output)");
  bench->add_flag("--pin", rc.pin, "Pin the process to one core");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : amdyn::cli::kFailure;
  }
  rc.subcommand = app.get_subcommands().front()->get_name();
  return amdyn::cli::run(rc);
}
