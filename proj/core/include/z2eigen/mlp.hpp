#pragma once
#include <cstddef>
#include <vector>

#include "z2eigen/jet.hpp"
#include "z2eigen/rng.hpp"

namespace z2eigen {

// Feedforward network shape: widths n_1 ... n_N with n_1 = 2 (chart
// coordinates) and n_N = 1. GELU between hidden layers, identity output.
struct LayerSpec {
  std::vector<int> widths{2, 64, 64, 64, 1};

  static LayerSpec standard() { return LayerSpec{}; }

  int num_affine() const { return static_cast<int>(widths.size()) - 1; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l)
      n += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
    return n;
  }

  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

// Flat parameter block: per affine layer a row-major weight matrix followed
// by the bias vector.
struct MlpParams {
  LayerSpec spec;
  std::vector<double> data;

  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;
  double* weights(int layer) { return data.data() + weight_offset(layer); }
  const double* weights(int layer) const { return data.data() + weight_offset(layer); }
  double* biases(int layer) { return data.data() + bias_offset(layer); }
  const double* biases(int layer) const { return data.data() + bias_offset(layer); }
};

// Zero biases, weights i.i.d. N(0, 2/n_in) per layer (std = sqrt(2/n_in)).
MlpParams he_init(Rng& rng, const LayerSpec& spec);

struct GeluDerivs {
  double g0, g1, g2, g3;
};

// x * Phi(x) with the exact normal CDF and its first three derivatives.
GeluDerivs gelu_derivs(double x);

Jet2 gelu(const Jet2& x);

// Per-point jet forward pass (reference path; the trainer uses the batched
// engine, which must agree with this bit for bit).
Jet2 forward(const MlpParams& params, const Jet2& in0, const Jet2& in1);

}  // namespace z2eigen
