#pragma once
#include <cmath>

#include "z2eigen/jet.hpp"

namespace z2eigen {

// Below this the value and every derivative of e^{-1/x} underflow to zero in
// double precision, so the flat branch is taken outright. Guarding before
// evaluating keeps 0 * inf out of jets when x approaches zero from above.
constexpr double kStepFlatThreshold = 1.0 / 700.0;

// T(x) = e^{-1/x} for x > 0, 0 otherwise. Smooth on all of R.
inline double smooth_T(double x) {
  if (x <= kStepFlatThreshold) return 0.0;
  return std::exp(-1.0 / x);
}

// S(x) = T(x) / (T(x) + T(1-x)): 0 for x <= 0, 1 for x >= 1, monotone.
inline double smooth_S(double x) {
  const double a = smooth_T(x);
  if (a == 0.0) return 0.0;
  const double b = smooth_T(1.0 - x);
  return a / (a + b);
}

template <class T>
inline Jet2T<T> smooth_T_jet(const Jet2T<T>& x) {
  using std::exp;
  if (!(primal(x.v) > kStepFlatThreshold)) return Jet2T<T>();  // exactly flat
  T inv = T(1.0) / x.v;
  T inv2 = inv * inv;
  T t = exp(-inv);
  // T' = T/x^2, T'' = T (1/x^4 - 2/x^3)
  return chain(x, t, t * inv2, t * (inv2 * inv2 - T(2.0) * inv2 * inv));
}

template <class T>
inline Jet2T<T> smooth_S_jet(const Jet2T<T>& x) {
  Jet2T<T> a = smooth_T_jet(x);
  if (primal(a.v) == 0.0) return Jet2T<T>();
  Jet2T<T> b = smooth_T_jet(1.0 - x);
  return a / (a + b);
}

// Scalar-type generic variants (T = double or ad::Var).
template <class T>
inline T smooth_T_t(const T& x) {
  using std::exp;
  if (!(primal(x) > kStepFlatThreshold)) return T(0.0);
  return exp(T(-1.0) / x);
}

template <class T>
inline T smooth_S_t(const T& x) {
  T a = smooth_T_t(x);
  if (primal(a) == 0.0) return T(0.0);
  T b = smooth_T_t(1.0 - x);
  return a / (a + b);
}

// Rising edge over [lo, hi]: 0 below lo, 1 above hi.
inline double step_up(double x, double lo, double hi) {
  return smooth_S((x - lo) / (hi - lo));
}

// Falling edge over [lo, hi]: 1 below lo, 0 above hi.
inline double step_down(double x, double lo, double hi) {
  return smooth_S((hi - x) / (hi - lo));
}

template <class T>
inline Jet2T<T> step_up_jet(const Jet2T<T>& x, const T& lo, const T& hi) {
  return smooth_S_jet(scale(x - Jet2T<T>(lo), T(1.0) / (hi - lo)));
}

template <class T>
inline Jet2T<T> step_down_jet(const Jet2T<T>& x, const T& lo, const T& hi) {
  return smooth_S_jet(scale(Jet2T<T>(hi) - x, T(1.0) / (hi - lo)));
}

}  // namespace z2eigen
