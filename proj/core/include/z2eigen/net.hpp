#pragma once
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "z2eigen/atlas.hpp"
#include "z2eigen/bump.hpp"
#include "z2eigen/mlp.hpp"
#include "z2eigen/sphere.hpp"

namespace z2eigen {

// The global 2-valued function u = sum of chart contributions: one network
// per chart, the eigenvalue, and the branch configuration.
struct TwoValuedNet {
  BranchConfiguration config;
  StarGraph graph;
  ChartAtlas atlas;
  std::vector<MlpParams> nets;  // atlas.charts order
  double lambda = 0.0;
  bool lambda_trainable = true;

  static TwoValuedNet create(const BranchConfiguration& config, const LayerSpec& spec, Rng& rng,
                             double lambda0);

  // Re-derive graph and atlas after branch points move. Chart topology
  // (counts, neighbor structure) must be unchanged; the caller keeps moves
  // small between steps.
  void rebuild_geometry();

  bool any_branch_trainable() const;

  // Flat trainable vector: [net 0][net 1]...[lambda][branch (phi, theta) per
  // trainable point]. The layout is the contract for optimizer state and
  // checkpoints.
  struct Layout {
    std::vector<std::size_t> net_offsets;
    std::size_t lambda_offset = 0;
    std::size_t branch_offset = 0;
    std::vector<std::size_t> trainable_points;
    std::size_t total = 0;
  };
  Layout layout() const;
  std::vector<double> pack() const;
  void unpack(std::span<const double> flat);
  // 1 where decoupled weight decay applies (weight matrices only).
  std::vector<std::uint8_t> decay_mask() const;
};

struct EvalResult {
  double u = 0.0;
  double lap_u = 0.0;
  double grad_u[2] = {0.0, 0.0};
};

// Contribution of one chart at x as a jet in global (phi, theta), placed on
// the reference sheet. Exact zero jet outside the bump support.
Jet2 eval_chart(const TwoValuedNet& net, std::size_t chart_index, const SpherePoint& x);

// Sum over charts (no on-cut / pole checks; |u| is continuous across cuts).
Jet2 eval_jet(const TwoValuedNet& net, const SpherePoint& x);

// Pointwise (u, lap u, grad u). Throws OnCut near the graph and
// PoleSingularity where sin(phi) is too small for the contraction.
EvalResult eval(const TwoValuedNet& net, const SpherePoint& x);

// sup |u| over 256 equispaced points on the geodesic circle of each radius
// around branch point `branch_index`.
std::vector<double> decay_profile(const TwoValuedNet& net, std::size_t branch_index,
                                  std::span<const double> radii);

std::size_t chart_of_branch(const ChartAtlas& atlas, std::size_t branch_index);

// Chart-consistent local double-cover coordinate at a branch point: the
// cut-aligned root with the chart placement sign folded in, so odd powers of
// it flip exactly where the evaluated u flips.
std::complex<double> branch_local_lift(const TwoValuedNet& net, std::size_t branch_index,
                                       const SpherePoint& x);

struct LeadingCoefficient {
  std::complex<double> a;
  double fit_residual = 0.0;
  bool nondegenerate = false;  // |a| > 10 * fit_residual
};

// Least-squares fit u ~ Re(a zeta^3) given samples.
LeadingCoefficient fit_leading_coefficient(std::span<const double> u,
                                           std::span<const std::complex<double>> zeta);

// Fit on the 64-point ring of geodesic radius 0.05 around the branch point.
LeadingCoefficient leading_coefficient(const TwoValuedNet& net, std::size_t branch_index);

}  // namespace z2eigen
