#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <type_traits>

namespace dmn {

// Forward-mode dual number carrying N directional derivatives alongside the
// value. Arithmetic propagates exact derivatives of every smooth operation;
// branch conditions read the value part only.
template <int N>
struct Dual {
  using Grad = Eigen::Matrix<double, N, 1>;

  double v = 0;
  Grad d = Grad::Zero();

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  Dual(double value, const Grad& grad) : v(value), d(grad) {}

  static Dual seeded(double value, int direction) {
    Dual r(value);
    r.d[direction] = 1.0;
    return r;
  }

  Dual operator-() const { return {-v, -d}; }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + o.d * v;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    v /= o.v;
    d = (d - o.d * v) / o.v;
    return *this;
  }
};

template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <int N>
Dual<N> operator+(double a, Dual<N> b) { return Dual<N>(a) + b; }
template <int N>
Dual<N> operator-(double a, const Dual<N>& b) { return Dual<N>(a) - b; }
template <int N>
Dual<N> operator*(double a, Dual<N> b) {
  b.v *= a;
  b.d *= a;
  return b;
}
template <int N>
Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }
template <int N>
Dual<N> operator+(Dual<N> a, double b) {
  a.v += b;
  return a;
}
template <int N>
Dual<N> operator-(Dual<N> a, double b) {
  a.v -= b;
  return a;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, double b) { return b * a; }
template <int N>
Dual<N> operator/(Dual<N> a, double b) {
  a.v /= b;
  a.d /= b;
  return a;
}

template <int N>
bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <int N>
bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <int N>
bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <int N>
bool operator>(const Dual<N>& a, double b) { return a.v > b; }
template <int N>
bool operator<=(const Dual<N>& a, double b) { return a.v <= b; }
template <int N>
bool operator>=(const Dual<N>& a, double b) { return a.v >= b; }

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  const double r = std::sqrt(a.v);
  return {r, a.d / (2.0 * r)};
}

template <int N>
Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return {e, a.d * e};
}

template <int N>
Dual<N> log(const Dual<N>& a) {
  return {std::log(a.v), a.d / a.v};
}

template <int N>
Dual<N> pow(const Dual<N>& a, double p) {
  const double f = std::pow(a.v, p);
  return {f, a.d * (p * std::pow(a.v, p - 1.0))};
}

template <int N>
Dual<N> abs(const Dual<N>& a) {
  return a.v < 0 ? -a : a;
}

template <int N>
Dual<N> max(const Dual<N>& a, const Dual<N>& b) {
  return a.v >= b.v ? a : b;
}

template <int N>
Dual<N> max(const Dual<N>& a, double b) {
  return a.v >= b ? a : Dual<N>(b);
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

template <typename T>
inline constexpr bool is_dual_v = false;
template <int N>
inline constexpr bool is_dual_v<Dual<N>> = true;

using std::abs;
using std::exp;
using std::log;
using std::max;
using std::pow;
using std::sqrt;

}  // namespace dmn
