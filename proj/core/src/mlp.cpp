#include "z2eigen/mlp.hpp"

#include <cmath>

#include "z2eigen/errors.hpp"

namespace z2eigen {

void LayerSpec::validate() const {
  if (widths.size() < 2) throw InvalidConfiguration("network needs at least one affine layer");
  if (widths.front() != 2) throw InvalidConfiguration("input width must be 2 (chart coordinates)");
  if (widths.back() != 1) throw InvalidConfiguration("output width must be 1");
  for (int w : widths)
    if (w <= 0) throw InvalidConfiguration("layer widths must be positive");
}

std::size_t MlpParams::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<std::size_t>(spec.widths[l + 1]) * spec.widths[l] + spec.widths[l + 1];
  return off;
}

std::size_t MlpParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(spec.widths[layer + 1]) * spec.widths[layer];
}

MlpParams he_init(Rng& rng, const LayerSpec& spec) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  p.data.assign(spec.param_count(), 0.0);
  for (int l = 0; l < spec.num_affine(); ++l) {
    const int n_in = spec.widths[l], n_out = spec.widths[l + 1];
    const double std_dev = std::sqrt(2.0 / n_in);
    double* w = p.weights(l);
    for (int i = 0; i < n_out * n_in; ++i) w[i] = std_dev * rng.normal();
    // biases stay zero
  }
  return p;
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

GeluDerivs gelu_derivs(double x) {
  const double Phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double dens = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  GeluDerivs g;
  g.g0 = x * Phi;
  g.g1 = Phi + x * dens;
  g.g2 = (2.0 - x * x) * dens;
  g.g3 = (x * x * x - 4.0 * x) * dens;
  return g;
}

Jet2 gelu(const Jet2& x) {
  const GeluDerivs g = gelu_derivs(x.v);
  return chain(x, g.g0, g.g1, g.g2);
}

Jet2 forward(const MlpParams& params, const Jet2& in0, const Jet2& in1) {
  const LayerSpec& spec = params.spec;
  std::vector<Jet2> cur{in0, in1}, next;
  for (int l = 0; l < spec.num_affine(); ++l) {
    const int n_in = spec.widths[l], n_out = spec.widths[l + 1];
    const double* W = params.weights(l);
    const double* b = params.biases(l);
    next.assign(static_cast<std::size_t>(n_out), Jet2());
    for (int i = 0; i < n_out; ++i) {
      Jet2 acc(b[i]);
      for (int j = 0; j < n_in; ++j) acc = acc + cur[static_cast<std::size_t>(j)] * W[i * n_in + j];
      next[static_cast<std::size_t>(i)] = acc;
    }
    if (l + 1 < spec.num_affine())
      for (Jet2& h : next) h = gelu(h);
    cur.swap(next);
  }
  require_finite(cur[0], "mlp forward");
  return cur[0];
}

}  // namespace z2eigen
