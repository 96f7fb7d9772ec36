#pragma once

// Wall-clock timing of forward and inverse dynamics evaluations.

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "amdyn/validate.hpp"

namespace amdyn {

struct Timing {
  std::size_t iterations = 0;
  double mean_s = 0.0;
  double min_s = 0.0;
};

/// Times `fn` once per iteration; zero iterations give an empty timing.
inline Timing time_iterations(std::size_t iterations, const std::function<void(std::size_t)>& fn) {
  Timing t;
  t.iterations = iterations;
  if (iterations == 0) return t;
  double total = 0.0, best = 0.0;
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto a = std::chrono::steady_clock::now();
    fn(i);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    total += dt;
    best = i == 0 ? dt : std::min(best, dt);
  }
  t.mean_s = total / static_cast<double>(iterations);
  t.min_s = best;
  return t;
}

struct BenchmarkRow {
  std::string model;
  int links = 0;
  std::string operation;  // forward or inverse
  Timing timing;
};

inline std::string platform_description() {
  std::string s;
#if defined(__clang__)
  s = "clang " __clang_version__;
#elif defined(__GNUC__)
  s = "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__) + "." + std::to_string(__GNUC_PATCHLEVEL__);
#else
  s = "unknown compiler";
#endif
#if defined(__linux__)
  s += ", linux";
#elif defined(__APPLE__)
  s += ", macos";
#elif defined(_WIN32)
  s += ", windows";
#endif
#if defined(__x86_64__)
  s += ", x86_64";
#elif defined(__aarch64__)
  s += ", aarch64";
#endif
  return s;
}

/// Forward and inverse dynamics at a fixed pool of random states (numeric path).
inline std::vector<BenchmarkRow> benchmark_dynamics(const Model& model, const std::string& name, std::size_t iterations,
                                                    unsigned long seed = 42,
                                                    CoriolisMethod method = CoriolisMethod::Mixed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<SystemState> states;
  std::vector<VecXd> loads;
  for (int i = 0; i < 16; ++i) {
    states.push_back(random_state(rng, model.num_joints()));
    VecXd f(model.dim());
    for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = u(rng);
    loads.push_back(f);
  }
  // Forward and inverse alternate on the same state so clock drift affects both alike.
  double sink = 0.0;
  std::vector<double> tf, ti;
  tf.reserve(iterations);
  ti.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const SystemState& s = states[i % 16];
    const VecXd& f = loads[i % 16];
    auto a = std::chrono::steady_clock::now();
    sink += forward_dynamics(model, s, f, method)[0];
    auto b = std::chrono::steady_clock::now();
    sink += inverse_dynamics(model, s, f, method)[0];
    auto c = std::chrono::steady_clock::now();
    tf.push_back(std::chrono::duration<double>(b - a).count());
    ti.push_back(std::chrono::duration<double>(c - b).count());
  }
  auto summarize = [&](const std::vector<double>& v) {
    Timing t;
    t.iterations = v.size();
    if (v.empty()) return t;
    double total = 0.0;
    t.min_s = v[0];
    for (double x : v) {
      total += x;
      t.min_s = std::min(t.min_s, x);
    }
    t.mean_s = total / static_cast<double>(v.size());
    return t;
  };
  const Timing fwd = summarize(tf), inv = summarize(ti);
  if (sink == 1.2345e300) std::puts("");  // keeps the results observable
  return {{name, model.num_joints(), "forward", fwd}, {name, model.num_joints(), "inverse", inv}};
}

inline void write_benchmark_header(std::ostream& os) { os << "model,links,operation,iterations,mean_us,min_us\n"; }

inline void write_benchmark_row(std::ostream& os, const BenchmarkRow& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f,%.3f", r.timing.mean_s * 1e6, r.timing.min_s * 1e6);
  os << r.model << ',' << r.links << ',' << r.operation << ',' << r.timing.iterations << ',' << buf << '\n';
}

}  // namespace amdyn
