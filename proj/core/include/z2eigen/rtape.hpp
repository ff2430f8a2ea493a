#pragma once
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace z2eigen::ad {

// Minimal reverse-mode tape over scalars. Nodes store up to two parents and
// the local partials, so a single backward sweep accumulates adjoints.
class Tape {
 public:
  struct Node {
    int a = -1, b = -1;
    double da = 0.0, db = 0.0;
  };

  int push(double) { nodes_.push_back({}); return size_grow(); }
  int push(double, int a, double da) { nodes_.push_back({a, -1, da, 0.0}); return size_grow(); }
  int push(double, int a, double da, int b, double db) { nodes_.push_back({a, b, da, db}); return size_grow(); }

  void reset() { nodes_.clear(); values_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  void store_value(double v) { values_.push_back(v); }
  double value(int id) const { return values_[static_cast<std::size_t>(id)]; }

  // Adjoints for every node given seeds set via seed_adjoint().
  void backward(std::vector<double>& bar) const {
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      const double g = bar[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      if (n.a >= 0) bar[static_cast<std::size_t>(n.a)] += n.da * g;
      if (n.b >= 0) bar[static_cast<std::size_t>(n.b)] += n.db * g;
    }
  }

 private:
  int size_grow() { return static_cast<int>(nodes_.size()) - 1; }
  std::vector<Node> nodes_;
  std::vector<double> values_;
};

inline Tape*& active_tape() {
  static thread_local Tape* tape = nullptr;
  return tape;
}

// Taped scalar. Arithmetic records onto the thread-local active tape.
struct Var {
  double v = 0.0;
  int id = -1;

  Var() = default;
  Var(double value) : v(value) {
    id = active_tape()->push(value);
    active_tape()->store_value(value);
  }
  Var(double value, int node) : v(value), id(node) {}

  static Var make(double value, int a, double da) {
    Tape* t = active_tape();
    int id = t->push(value, a, da);
    t->store_value(value);
    return Var(value, id);
  }
  static Var make(double value, int a, double da, int b, double db) {
    Tape* t = active_tape();
    int id = t->push(value, a, da, b, db);
    t->store_value(value);
    return Var(value, id);
  }
};

inline double primal(const Var& x) { return x.v; }
inline double primal(double x) { return x; }

inline Var operator+(const Var& x, const Var& y) { return Var::make(x.v + y.v, x.id, 1.0, y.id, 1.0); }
inline Var operator-(const Var& x, const Var& y) { return Var::make(x.v - y.v, x.id, 1.0, y.id, -1.0); }
inline Var operator*(const Var& x, const Var& y) { return Var::make(x.v * y.v, x.id, y.v, y.id, x.v); }
inline Var operator/(const Var& x, const Var& y) {
  double inv = 1.0 / y.v;
  return Var::make(x.v * inv, x.id, inv, y.id, -x.v * inv * inv);
}
inline Var operator-(const Var& x) { return Var::make(-x.v, x.id, -1.0); }

inline Var operator+(const Var& x, double c) { return Var::make(x.v + c, x.id, 1.0); }
inline Var operator+(double c, const Var& x) { return x + c; }
inline Var operator-(const Var& x, double c) { return Var::make(x.v - c, x.id, 1.0); }
inline Var operator-(double c, const Var& x) { return Var::make(c - x.v, x.id, -1.0); }
inline Var operator*(const Var& x, double c) { return Var::make(x.v * c, x.id, c); }
inline Var operator*(double c, const Var& x) { return x * c; }
inline Var operator/(const Var& x, double c) { return x * (1.0 / c); }
inline Var operator/(double c, const Var& x) {
  double inv = 1.0 / x.v;
  return Var::make(c * inv, x.id, -c * inv * inv);
}

inline Var& operator+=(Var& x, const Var& y) { x = x + y; return x; }
inline Var& operator-=(Var& x, const Var& y) { x = x - y; return x; }
inline Var& operator*=(Var& x, const Var& y) { x = x * y; return x; }

inline Var sin(const Var& x) { return Var::make(std::sin(x.v), x.id, std::cos(x.v)); }
inline Var cos(const Var& x) { return Var::make(std::cos(x.v), x.id, -std::sin(x.v)); }
inline Var sqrt(const Var& x) {
  double s = std::sqrt(x.v);
  return Var::make(s, x.id, 0.5 / s);
}
inline Var exp(const Var& x) {
  double e = std::exp(x.v);
  return Var::make(e, x.id, e);
}
inline Var log(const Var& x) { return Var::make(std::log(x.v), x.id, 1.0 / x.v); }
inline Var erf(const Var& x) {
  return Var::make(std::erf(x.v), x.id, 1.1283791670955125739 * std::exp(-x.v * x.v));
}
inline Var atan2(const Var& y, const Var& x) {
  double d = x.v * x.v + y.v * y.v;
  return Var::make(std::atan2(y.v, x.v), y.id, x.v / d, x.id, -y.v / d);
}
inline Var abs(const Var& x) { return Var::make(std::abs(x.v), x.id, x.v < 0.0 ? -1.0 : 1.0); }
inline Var acos(const Var& x) {
  return Var::make(std::acos(x.v), x.id, -1.0 / std::sqrt(1.0 - x.v * x.v));
}

// RAII scope that installs a tape as the active one.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(active_tape()) { active_tape() = &tape; }
  ~TapeScope() { active_tape() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Gradient of a scalar program at x0. The closure runs once on taped scalars;
// the backward sweep yields d(out)/d(x0_k) for every input.
inline std::vector<double> grad_of(const std::function<Var(std::span<const Var>)>& program,
                                   std::span<const double> x0) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> inputs;
  inputs.reserve(x0.size());
  for (double v : x0) inputs.emplace_back(v);
  Var out = program(inputs);
  std::vector<double> bar(tape.size(), 0.0);
  bar[static_cast<std::size_t>(out.id)] = 1.0;
  tape.backward(bar);
  std::vector<double> grad(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) grad[k] = bar[static_cast<std::size_t>(inputs[k].id)];
  return grad;
}

}  // namespace z2eigen::ad
