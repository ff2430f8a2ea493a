#include <doctest.h>

#include <functional>

#include "helpers.hpp"
#include "z2eigen/jet.hpp"
#include "z2eigen/mlp.hpp"
#include "z2eigen/rtape.hpp"

using namespace z2eigen;
using namespace z2t;

TEST_SUITE_BEGIN("jets");

TEST_CASE("seeds and basic calculus") {
  Jet2 a = seed(0, 3.0);
  CHECK(a.v == 3.0);
  CHECK(a.d1[0] == 1.0);
  CHECK(a.d1[1] == 0.0);
  for (double d : a.d2) CHECK(d == 0.0);

  Jet2 prod = seed(0, 2.0) * seed(1, 5.0);
  CHECK(prod.v == 10.0);
  CHECK(prod.d1[0] == 5.0);
  CHECK(prod.d1[1] == 2.0);
  CHECK(prod.d2[0] == 0.0);
  CHECK(prod.d2[1] == 1.0);
  CHECK(prod.d2[2] == 0.0);

  Jet2 e = exp(seed(0, 0.0));
  CHECK(e.v == 1.0);
  CHECK(e.d1[0] == 1.0);
  CHECK(e.d1[1] == 0.0);
  CHECK(e.d2[0] == 1.0);
  CHECK(e.d2[1] == 0.0);
  CHECK(e.d2[2] == 0.0);
}

TEST_CASE("laplace-beltrami on closed forms") {
  // constants
  CHECK(laplace_beltrami(constant_jet(2.5), 1.0) == 0.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double phi = 0.2 + 2.7 * rng.uniform();
    const double theta = kTwoPi * rng.uniform();
    const Jet2 jp = seed(0, phi), jt = seed(1, theta);
    {
      Jet2 u = cos(jp);  // l = 1
      CHECK(rel_err(laplace_beltrami(u, phi), 2.0 * u.v, 1e-6) < 1e-12);
    }
    {
      Jet2 u = sin(jp) * sin(jp) * cos(jt * 2.0);  // l = 2
      CHECK(rel_err(laplace_beltrami(u, phi), 6.0 * u.v, 1e-6) < 1e-11);
    }
  }
}

TEST_CASE("laplace-beltrami reproduces l(l+1) on spherical harmonics up to l = 3") {
  struct Harmonic {
    int l;
    std::function<Jet2(const Jet2&, const Jet2&)> f;
  };
  const std::vector<Harmonic> basis = {
      {0, [](const Jet2&, const Jet2&) { return constant_jet(1.0); }},
      {1, [](const Jet2& p, const Jet2&) { return cos(p); }},
      {1, [](const Jet2& p, const Jet2& t) { return sin(p) * cos(t); }},
      {2, [](const Jet2& p, const Jet2& t) { return sin(p) * sin(p) * cos(t * 2.0); }},
      {2, [](const Jet2& p, const Jet2& t) { return sin(p) * cos(p) * sin(t); }},
      {2, [](const Jet2& p, const Jet2&) { return cos(p) * cos(p) * 1.5 - 0.5; }},
      {3, [](const Jet2& p, const Jet2&) { return cos(p) * (cos(p) * cos(p) * 2.5 - 1.5); }},
      {3, [](const Jet2& p, const Jet2& t) { return sin(p) * sin(p) * sin(p) * cos(t * 3.0); }},
      {3,
       [](const Jet2& p, const Jet2& t) {
         return sin(p) * (cos(p) * cos(p) * 5.0 - 1.0) * sin(t);
       }},
  };
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double phi = std::acos(1.0 - 2.0 * rng.uniform());
    if (std::sin(phi) <= 0.05) continue;
    const double theta = kTwoPi * rng.uniform();
    const Jet2 jp = seed(0, phi), jt = seed(1, theta);
    for (const Harmonic& h : basis) {
      const Jet2 u = h.f(jp, jt);
      const double want = h.l * (h.l + 1) * u.v;
      CHECK(rel_err(laplace_beltrami(u, phi), want, 1.0) < 1e-10);
    }
  }
}

TEST_CASE("pole guard") {
  CHECK_THROWS_AS(laplace_beltrami(constant_jet(1.0), 1e-12), PoleSingularity);
}

namespace {

// Small random smooth programs evaluated both ways: plain doubles for finite
// differences and jets for the derivatives under test.
struct Node {
  int op;        // 0 leaf-x, 1 leaf-y, 2 const, 3 add, 4 sub, 5 mul, 6 sin, 7 expc, 8 sqrtp, 9 gelu
  double c = 0;  // constant payload
  int a = -1, b = -1;
};

struct Program {
  std::vector<Node> nodes;

  template <class V, class LX, class LY>
  V run(const LX& lx, const LY& ly) const {
    using std::exp;
    using std::sin;
    using std::sqrt;
    std::vector<V> val(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      switch (n.op) {
        case 0: val[i] = lx(); break;
        case 1: val[i] = ly(); break;
        case 2: val[i] = V(n.c); break;
        case 3: val[i] = val[n.a] + val[n.b]; break;
        case 4: val[i] = val[n.a] - val[n.b]; break;
        case 5: val[i] = val[n.a] * val[n.b]; break;
        case 6: val[i] = sin(val[n.a]); break;
        case 7: val[i] = exp(val[n.a] * 0.4); break;
        case 8: val[i] = sqrt(val[n.a] * val[n.a] + 1.5); break;
        default: val[i] = gelu_like(val[n.a]); break;
      }
    }
    return val.back();
  }

  static double gelu_like(double x) { return gelu_derivs(x).g0; }
  static Jet2 gelu_like(const Jet2& x) { return gelu(x); }
};

Program random_program(Rng& rng) {
  Program p;
  p.nodes.push_back({0, 0, -1, -1});
  p.nodes.push_back({1, 0, -1, -1});
  const int extra = 3 + static_cast<int>(rng.uniform() * 10);
  for (int i = 0; i < extra; ++i) {
    Node n;
    const double pick = rng.uniform();
    const int sz = static_cast<int>(p.nodes.size());
    if (pick < 0.12) {
      n = {2, rng.uniform(-1.0, 1.0), -1, -1};
    } else if (pick < 0.5) {
      n.op = 3 + static_cast<int>(rng.uniform() * 3.0);
      n.a = static_cast<int>(rng.uniform() * sz);
      n.b = static_cast<int>(rng.uniform() * sz);
    } else {
      n.op = 6 + static_cast<int>(rng.uniform() * 4.0);
      n.a = static_cast<int>(rng.uniform() * sz);
    }
    p.nodes.push_back(n);
  }
  return p;
}

}  // namespace

TEST_CASE("jets match finite differences on random smooth programs") {
  Rng rng(2024);
  int tested = 0;
  while (tested < 1000) {
    Program prog = random_program(rng);
    const double x0 = rng.uniform(0.2, 1.1), y0 = rng.uniform(0.2, 1.1);
    auto val = [&](double x, double y) {
      return prog.run<double>([&] { return x; }, [&] { return y; });
    };
    const Jet2 jet =
        prog.run<Jet2>([&] { return seed(0, x0); }, [&] { return seed(1, y0); });
    // keep the comparison in a well-conditioned regime
    if (!jet_finite(jet) || std::abs(jet.v) > 10.0) continue;
    bool big = false;
    for (double d : jet.d2) big = big || std::abs(d) > 50.0;
    if (big) continue;
    ++tested;
    const double h = 1e-4;
    const double fx = (val(x0 + h, y0) - val(x0 - h, y0)) / (2 * h);
    const double fy = (val(x0, y0 + h) - val(x0, y0 - h)) / (2 * h);
    const double fxx = (val(x0 + h, y0) - 2 * val(x0, y0) + val(x0 - h, y0)) / (h * h);
    const double fyy = (val(x0, y0 + h) - 2 * val(x0, y0) + val(x0, y0 - h)) / (h * h);
    const double fxy =
        (val(x0 + h, y0 + h) - val(x0 + h, y0 - h) - val(x0 - h, y0 + h) + val(x0 - h, y0 - h)) /
        (4 * h * h);
    CHECK(rel_err(jet.d1[0], fx) < 1e-5);
    CHECK(rel_err(jet.d1[1], fy) < 1e-5);
    CHECK(rel_err(jet.d2[0], fxx) < 1e-5);
    CHECK(rel_err(jet.d2[2], fyy) < 1e-5);
    CHECK(rel_err(jet.d2[1], fxy) < 1e-5);
  }
}

TEST_CASE("reverse tape: gradient of a quadratic") {
  std::vector<double> theta{0.5, -1.25, 3.0, 0.0};
  auto program = [](std::span<const ad::Var> in) {
    ad::Var s(0.0);
    for (const ad::Var& v : in) s = s + v * v;
    return s;
  };
  std::vector<double> g = ad::grad_of(program, theta);
  REQUIRE(g.size() == theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(g[i] == doctest::Approx(2.0 * theta[i]));
}

TEST_CASE("reverse tape: single-layer network output matches finite differences") {
  // params: w11 w12 w21 w22 b1 b2 v1 v2 c at input (x, y) = (0.4, -0.3)
  const double x = 0.4, y = -0.3;
  std::vector<double> theta{0.7, -0.2, 0.5, 1.1, 0.05, -0.4, 1.3, -0.8, 0.2};
  auto net_value = [&](auto get) {
    auto gelu_of = [&](auto a) {
      using std::erf;
      constexpr double inv_sqrt2 = 0.70710678118654752440;
      return a * 0.5 * (1.0 + erf(a * inv_sqrt2));
    };
    auto h1 = gelu_of(get(0) * x + get(1) * y + get(4));
    auto h2 = gelu_of(get(2) * x + get(3) * y + get(5));
    return get(6) * h1 + get(7) * h2 + get(8);
  };
  auto program = [&](std::span<const ad::Var> in) {
    return net_value([&](int i) { return in[static_cast<std::size_t>(i)]; });
  };
  std::vector<double> g = ad::grad_of(program, theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6;
    std::vector<double> tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fp = net_value([&](int k) { return tp[static_cast<std::size_t>(k)]; });
    const double fm = net_value([&](int k) { return tm[static_cast<std::size_t>(k)]; });
    CHECK(rel_err(g[i], (fp - fm) / (2 * h)) < 1e-6);
  }
}

TEST_SUITE_END();
