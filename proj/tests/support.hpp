#pragma once

// Shared fixtures: bundled models, random draws and small matrix helpers.

#include <gtest/gtest.h>

#include <random>
#include <string>

#include "amdyn/config.hpp"
#include "amdyn/validate.hpp"

namespace amdyn::test {

inline std::string data_path(const std::string& rel) { return std::string(AMDYN_DATA_DIR) + "/" + rel; }

inline Model bundled(const std::string& name) {
  return load_model(data_path("models/" + name + ".urdf"), data_path("models/" + name + ".cfg"));
}

inline const char* kModels[] = {"uav_0link", "am_1link", "am_2link", "am_3link"};

inline Quaterniond random_quaternion(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng), n(rng)};
}

inline UnitQuaternion random_unit(std::mt19937_64& rng) { return UnitQuaternion(random_quaternion(rng)); }

inline Vec3d random_vec3(std::mt19937_64& rng, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

inline VecXd random_vec(std::mt19937_64& rng, Eigen::Index n, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  VecXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline double max_abs(const MatXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Random state on the constraint manifold: unit q and qᵀq̇ = 0.
inline SystemState manifold_state(std::mt19937_64& rng, int nj) {
  SystemState s = random_state(rng, nj);
  s.set_omega_body(random_vec3(rng));
  return s;
}

}  // namespace amdyn::test
