#pragma once
#include <cmath>

#include "z2eigen/errors.hpp"

namespace z2eigen {

// Order-2 Taylor data of a scalar in two coordinates. For points on the
// sphere the coordinates are (phi, theta); inside a chart they are the two
// real chart coordinates. Arithmetic propagates exact truncated Taylor
// composition, so d2 entries are true second derivatives of the composite.
//
// The scalar type T is double in the fast path and ad::Var when tangents
// with respect to branch-point coordinates are being recorded.
template <class T = double>
struct Jet2T {
  T v{};
  T d1[2]{};
  T d2[3]{};  // (00, 01, 11) with coordinate order (phi, theta)

  Jet2T() = default;
  Jet2T(T value) : v(value) {}
};

using Jet2 = Jet2T<double>;

inline double primal(double x) { return x; }

// Independent-variable jet: unit first derivative in one coordinate slot.
template <class T = double>
inline Jet2T<T> seed(int coord_index, T value) {
  Jet2T<T> j(value);
  j.d1[coord_index] = T(1.0);
  return j;
}

template <class T>
inline Jet2T<T> constant_jet(T value) { return Jet2T<T>(value); }

template <class T>
inline Jet2T<T> operator+(const Jet2T<T>& a, const Jet2T<T>& b) {
  Jet2T<T> c;
  c.v = a.v + b.v;
  for (int k = 0; k < 2; ++k) c.d1[k] = a.d1[k] + b.d1[k];
  for (int k = 0; k < 3; ++k) c.d2[k] = a.d2[k] + b.d2[k];
  return c;
}

template <class T>
inline Jet2T<T> operator-(const Jet2T<T>& a, const Jet2T<T>& b) {
  Jet2T<T> c;
  c.v = a.v - b.v;
  for (int k = 0; k < 2; ++k) c.d1[k] = a.d1[k] - b.d1[k];
  for (int k = 0; k < 3; ++k) c.d2[k] = a.d2[k] - b.d2[k];
  return c;
}

template <class T>
inline Jet2T<T> operator-(const Jet2T<T>& a) {
  Jet2T<T> c;
  c.v = -a.v;
  for (int k = 0; k < 2; ++k) c.d1[k] = -a.d1[k];
  for (int k = 0; k < 3; ++k) c.d2[k] = -a.d2[k];
  return c;
}

template <class T>
inline Jet2T<T> operator*(const Jet2T<T>& a, const Jet2T<T>& b) {
  Jet2T<T> c;
  c.v = a.v * b.v;
  c.d1[0] = a.d1[0] * b.v + a.v * b.d1[0];
  c.d1[1] = a.d1[1] * b.v + a.v * b.d1[1];
  c.d2[0] = a.d2[0] * b.v + a.d1[0] * b.d1[0] + a.d1[0] * b.d1[0] + a.v * b.d2[0];
  c.d2[1] = a.d2[1] * b.v + a.d1[0] * b.d1[1] + a.d1[1] * b.d1[0] + a.v * b.d2[1];
  c.d2[2] = a.d2[2] * b.v + a.d1[1] * b.d1[1] + a.d1[1] * b.d1[1] + a.v * b.d2[2];
  return c;
}

template <class T>
inline Jet2T<T> operator*(const Jet2T<T>& a, double s) {
  Jet2T<T> c;
  c.v = a.v * s;
  for (int k = 0; k < 2; ++k) c.d1[k] = a.d1[k] * s;
  for (int k = 0; k < 3; ++k) c.d2[k] = a.d2[k] * s;
  return c;
}

template <class T>
inline Jet2T<T> operator*(double s, const Jet2T<T>& a) { return a * s; }

// Scale by a T-valued constant (no jet structure on s).
template <class T>
inline Jet2T<T> scale(const Jet2T<T>& a, const T& s) {
  Jet2T<T> c;
  c.v = a.v * s;
  for (int k = 0; k < 2; ++k) c.d1[k] = a.d1[k] * s;
  for (int k = 0; k < 3; ++k) c.d2[k] = a.d2[k] * s;
  return c;
}

template <class T>
inline Jet2T<T> operator+(const Jet2T<T>& a, double s) {
  Jet2T<T> c = a;
  c.v = a.v + s;
  return c;
}

template <class T>
inline Jet2T<T> operator+(double s, const Jet2T<T>& a) { return a + s; }

template <class T>
inline Jet2T<T> operator-(const Jet2T<T>& a, double s) { return a + (-s); }

template <class T>
inline Jet2T<T> operator-(double s, const Jet2T<T>& a) { return (-a) + s; }

// y = f(x) for scalar f with derivatives (s0, s1, s2) at x.v.
template <class T>
inline Jet2T<T> chain(const Jet2T<T>& x, const T& s0, const T& s1, const T& s2) {
  Jet2T<T> y;
  y.v = s0;
  y.d1[0] = s1 * x.d1[0];
  y.d1[1] = s1 * x.d1[1];
  y.d2[0] = s2 * x.d1[0] * x.d1[0] + s1 * x.d2[0];
  y.d2[1] = s2 * x.d1[0] * x.d1[1] + s1 * x.d2[1];
  y.d2[2] = s2 * x.d1[1] * x.d1[1] + s1 * x.d2[2];
  return y;
}

template <class T>
inline Jet2T<T> reciprocal(const Jet2T<T>& x) {
  T inv = T(1.0) / x.v;
  T inv2 = inv * inv;
  return chain(x, inv, -inv2, T(2.0) * inv2 * inv);
}

// Direct form rather than a * reciprocal(b): saturated ratios like T/(T+0)
// then come out exactly 1 with exactly flat derivatives.
template <class T>
inline Jet2T<T> operator/(const Jet2T<T>& a, const Jet2T<T>& b) {
  Jet2T<T> c;
  T inv = T(1.0) / b.v;
  c.v = a.v / b.v;
  c.d1[0] = (a.d1[0] - c.v * b.d1[0]) * inv;
  c.d1[1] = (a.d1[1] - c.v * b.d1[1]) * inv;
  c.d2[0] = (a.d2[0] - c.d1[0] * b.d1[0] - c.d1[0] * b.d1[0] - c.v * b.d2[0]) * inv;
  c.d2[1] = (a.d2[1] - c.d1[0] * b.d1[1] - c.d1[1] * b.d1[0] - c.v * b.d2[1]) * inv;
  c.d2[2] = (a.d2[2] - c.d1[1] * b.d1[1] - c.d1[1] * b.d1[1] - c.v * b.d2[2]) * inv;
  return c;
}

template <class T>
inline Jet2T<T> operator/(const Jet2T<T>& a, double s) { return a * (1.0 / s); }

template <class T>
inline Jet2T<T> sin(const Jet2T<T>& x) {
  using std::cos;
  using std::sin;
  T s = sin(x.v), c = cos(x.v);
  return chain(x, s, c, -s);
}

template <class T>
inline Jet2T<T> cos(const Jet2T<T>& x) {
  using std::cos;
  using std::sin;
  T c = cos(x.v), s = sin(x.v);
  return chain(x, c, -s, -c);
}

template <class T>
inline Jet2T<T> exp(const Jet2T<T>& x) {
  using std::exp;
  T e = exp(x.v);
  return chain(x, e, e, e);
}

template <class T>
inline Jet2T<T> sqrt(const Jet2T<T>& x) {
  using std::sqrt;
  T s = sqrt(x.v);
  T s1 = T(0.5) / s;
  T s2 = T(-0.5) * s1 / x.v;
  return chain(x, s, s1, s2);
}

template <class T>
inline Jet2T<T> erf(const Jet2T<T>& x) {
  using std::erf;
  using std::exp;
  // d/dx erf = 2/sqrt(pi) e^{-x^2}
  T g = T(1.1283791670955125739) * exp(-(x.v * x.v));
  return chain(x, erf(x.v), g, T(-2.0) * x.v * g);
}

inline bool jet_finite(const Jet2& j) {
  if (!std::isfinite(j.v)) return false;
  for (double d : j.d1) if (!std::isfinite(d)) return false;
  for (double d : j.d2) if (!std::isfinite(d)) return false;
  return true;
}

inline void require_finite(const Jet2& j, const char* where) {
  if (!jet_finite(j)) throw JetOverflow(std::string("non-finite jet in ") + where);
}

constexpr double kPoleSinEps = 1e-8;

// Laplace-Beltrami on the unit sphere, positive-spectrum sign convention:
// constants map to 0 and degree-l spherical harmonics to l(l+1) times
// themselves. The jet must be in global (phi, theta) coordinates.
template <class T>
inline T laplace_beltrami(const Jet2T<T>& u, double phi) {
  const double sp = std::sin(phi);
  if (!(sp > kPoleSinEps)) throw PoleSingularity("laplace_beltrami: evaluation too close to a pole");
  const double cot = std::cos(phi) / sp;
  const double inv_s2 = 1.0 / (sp * sp);
  return -(u.d2[0] + cot * u.d1[0] + inv_s2 * u.d2[2]);
}

}  // namespace z2eigen
