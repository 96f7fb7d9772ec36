#pragma once

// Kinematic tree plus the data URDF cannot carry: gravity, the scaling
// inertia ν, propellers and actuator dynamics.

#include <string>
#include <vector>

#include "amdyn/common.hpp"
#include "amdyn/urdf.hpp"

namespace amdyn {

/// Propeller mounted on the base link. Position and axis are in the base-link frame.
struct Motor {
  Vec3d position{Vec3d::Zero()};
  Vec3d axis{Vec3d::UnitZ()};
  int spin = 1;         // +1 or -1, sign of the drag torque along `axis`
  double k_t = 0.0;     // thrust coefficient, N/rpm²
  double k_p = 0.0;     // drag-torque coefficient, N·m/rpm²
};

/// First-order lag K/(1 + Ts) per actuator class.
struct ActuatorParams {
  double prop_time_constant = 0.2;  // s
  double prop_peak = 4500.0;        // rpm
  double joint_time_constant = 0.2; // s
  double joint_peak = 16.0;         // N·m
};

struct ModelParams {
  Vec3d gravity{0.0, 0.0, -9.81};
  double nu = 1.0;
  std::vector<Motor> motors;
  ActuatorParams actuators;

  void validate() const {
    if (!(nu > 0.0)) throw ValidationError("nu must be positive");
    if (!gravity.allFinite()) throw ValidationError("gravity must be finite");
    for (std::size_t i = 0; i < motors.size(); ++i) {
      const auto& m = motors[i];
      const std::string id = "motor " + std::to_string(i + 1);
      if (!(m.k_t > 0.0)) throw ValidationError(id + ": k_t must be positive");
      if (!(m.k_p >= 0.0)) throw ValidationError(id + ": k_p must be non-negative");
      if (m.spin != 1 && m.spin != -1) throw ValidationError(id + ": spin must be +1 or -1");
      if (std::abs(m.axis.norm() - 1.0) > 1e-9) throw ValidationError(id + ": axis must be unit length");
    }
    if (!(actuators.prop_time_constant > 0.0) || !(actuators.joint_time_constant > 0.0))
      throw ValidationError("actuator time constants must be positive");
    if (!(actuators.prop_peak > 0.0) || !(actuators.joint_peak > 0.0))
      throw ValidationError("actuator peak values must be positive");
  }
};

struct Model {
  KinematicTree tree;
  ModelParams params;

  int num_joints() const { return tree.num_joints(); }
  int num_motors() const { return static_cast<int>(params.motors.size()); }
  /// Dimension of x for the quaternion parameterization.
  int dim() const { return 7 + tree.num_joints(); }
};

}  // namespace amdyn
