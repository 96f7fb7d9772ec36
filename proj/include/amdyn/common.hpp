#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amdyn {

template <class T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <class T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <class T> using Mat34 = Eigen::Matrix<T, 3, 4>;
template <class T> using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T> using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T, int Rows> using MatRX = Eigen::Matrix<T, Rows, Eigen::Dynamic>;

using Vec3d = Vec3<double>;
using Vec4d = Vec4<double>;
using Mat3d = Mat3<double>;
using Mat4d = Mat4<double>;
using Mat34d = Mat34<double>;
using VecXd = VecX<double>;
using MatXd = MatX<double>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (zero quaternion, non-unit axis, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Kinematic tree is not a tree (cycle, missing parent, several roots, ...).
class StructureError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFeature : public Error {
 public:
  using Error::Error;
};

/// Physically invalid model data (non-positive mass, indefinite inertia, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear-algebra step failed (factorization, inverse square root).
class SolverError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ControllabilityError : public Error {
 public:
  using Error::Error;
};

/// Symbolic engine exceeded its configured size budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace amdyn
