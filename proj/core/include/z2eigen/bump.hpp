#pragma once
#include "z2eigen/atlas.hpp"
#include "z2eigen/jet.hpp"
#include "z2eigen/step.hpp"

namespace z2eigen {

// Bump value of one chart at x, with exact order-2 derivatives in
// (phi, theta). Zero jet in dead zones inside the chart; OutsideChart when x
// is not in the chart domain at all.
Jet2 bump(const Chart& chart, const ChartAtlas& atlas, const StarGraph& graph,
          const SpherePoint& x);

// Sum of all chart bumps at x (cover positivity diagnostic).
double bump_cover_total(const ChartAtlas& atlas, const StarGraph& graph, const SpherePoint& x);

inline constexpr double kWeightFarField = 0.3;   // rad; w is constant past this
inline constexpr double kWeightBlendBand = 0.05;  // rad

// Residual weight for the C0 loss term: equals the distance to the nearest
// branch point close to the branch set and the constant 0.3 rad elsewhere,
// blended smoothly over a 0.05 rad band.
template <class T>
T weight_w_t(const std::vector<std::array<T, 2>>& branch_pts, const SpherePoint& x) {
  using std::acos;
  using std::cos;
  using std::sin;
  // nearest branch point by primal distance
  const Vec3 xv = x.to_unit();
  std::size_t best = 0;
  double best_d = 10.0;
  for (std::size_t j = 0; j < branch_pts.size(); ++j) {
    const double c = std::sin(primal(branch_pts[j][0])) *
                         (std::cos(primal(branch_pts[j][1])) * xv[0] +
                          std::sin(primal(branch_pts[j][1])) * xv[1]) +
                     std::cos(primal(branch_pts[j][0])) * xv[2];
    const double d = std::acos(std::clamp(c, -1.0, 1.0));
    if (d < best_d) { best_d = d; best = j; }
  }
  if (best_d >= kWeightFarField) return T(kWeightFarField);
  const auto& p = branch_pts[best];
  T c = sin(p[0]) * (cos(p[1]) * xv[0] + sin(p[1]) * xv[1]) + cos(p[0]) * xv[2];
  if (primal(c) >= 1.0) return T(0.0);
  T r = acos(c);
  const double lo = kWeightFarField - kWeightBlendBand;
  if (best_d <= lo) return r;
  T s = smooth_S_t((r - lo) * (1.0 / kWeightBlendBand));
  return r + (T(kWeightFarField) - r) * s;
}

double weight_w(const BranchConfiguration& config, const SpherePoint& x);

}  // namespace z2eigen
