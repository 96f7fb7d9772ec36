#pragma once

// Forward-mode dual numbers with a single tangent direction. Nesting
// (Dual<Dual<double>>) yields mixed second derivatives.

#include <cmath>
#include <type_traits>

#include <Eigen/Core>

namespace amdyn {

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // tangent

  Dual() = default;
  Dual(const T& value, const T& tangent) : v(value), d(tangent) {}
  template <class A, std::enable_if_t<std::is_arithmetic_v<A>, int> = 0>
  Dual(A value) : v(T(static_cast<double>(value))), d(T(0.0)) {}  // NOLINT(implicit)
  template <class U = T, std::enable_if_t<!std::is_arithmetic_v<U>, int> = 0>
  Dual(const T& value) : v(value), d(T(0.0)) {}  // NOLINT(implicit)

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator+(const Dual& a) { return a; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.v == b.v && a.d == b.d; }
  friend bool operator!=(const Dual& a, const Dual& b) { return !(a == b); }
};

template <class T>
Dual<T> sin(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {sin(x.v), cos(x.v) * x.d};
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {cos(x.v), -(sin(x.v) * x.d)};
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  T r = sqrt(x.v);
  return {r, x.d / (T(2.0) * r)};
}

template <class T>
Dual<T> abs(const Dual<T>& x) {
  return x.v < T(0.0) ? -x : x;
}

}  // namespace amdyn

namespace Eigen {

template <class T>
struct NumTraits<amdyn::Dual<T>> : NumTraits<double> {
  using Real = amdyn::Dual<T>;
  using NonInteger = amdyn::Dual<T>;
  using Nested = amdyn::Dual<T>;
  using Literal = amdyn::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2 * NumTraits<T>::ReadCost,
    AddCost = 2 * NumTraits<T>::AddCost,
    MulCost = 3 * NumTraits<T>::MulCost
  };
};

}  // namespace Eigen
