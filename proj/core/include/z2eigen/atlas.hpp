#pragma once
#include <complex>
#include <cstddef>
#include <vector>

#include "z2eigen/sphere.hpp"

namespace z2eigen {

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

// Relative rim width of dome charts and wall width of slice charts.
inline constexpr double kDomeMargin = 0.05;
inline constexpr double kRimBandFraction = 0.2;
// Polar cap bands of slice charts, as fractions of the adjacent dome radius.
inline constexpr double kCapLoFraction = 0.75;
inline constexpr double kCapHiFraction = 0.95;
// Slices taper off before the antipode of their branch point, where the
// conformal coordinate blows up. Inactive for every preset; only very wide
// slices (azimuth gap > 0.8*pi) see it.
inline constexpr double kAntipodeGuardLo = 0.80 * kPi;
inline constexpr double kAntipodeGuardHi = 0.92 * kPi;

enum class ChartKind { NorthDome, OrangeSlice, SouthDome, SouthDomeWithSlice };

// A chart stores the indices that define its shape (which branch points set
// the walls, which set the dome radii), so its parameters can be re-derived
// when branch points move during training.
struct Chart {
  ChartKind kind = ChartKind::NorthDome;
  SpherePoint center;
  bool has_branch_point = false;
  std::size_t branch_index = kNoIndex;  // into BranchConfiguration::points
  std::size_t west_index = kNoIndex;    // branch point whose azimuth is the west wall
  std::size_t east_index = kNoIndex;
  bool west_is_south_edge = false;  // wall at theta = 0 (the south-pole cut)
  bool east_is_south_edge = false;

  // Primal snapshot of the derived parameters (doubles; authoritative for
  // fixed-branch runs, re-derived for trainable ones).
  double theta_center = 0.0;
  double gap_west = kPi, gap_east = kPi;
  double dome_radius = 0.0;
};

struct ChartAtlas {
  std::vector<Chart> charts;
  BranchConfiguration config;  // snapshot the atlas was built from
  double north_dome_radius = 0.0;
  double south_dome_radius = 0.0;
  std::size_t north_radius_argmin = kNoIndex;  // j > 0 minimizing phi_j
  std::size_t south_radius_argmin = kNoIndex;  // j minimizing pi - phi_j (south excluded)
  bool south_has_branch = false;
  std::size_t south_branch_index = kNoIndex;
};

// One north dome, one orange slice per generic branch point, and a south
// chart (plain dome, or dome + slice straddling theta = 0 when a branch
// point sits at the south pole). Throws CoverageFailure if the bump-weighted
// cover misses any probe point on a 256 x 512 grid.
ChartAtlas build_atlas(const BranchConfiguration& config, const StarGraph& graph);

// True if x lies in the chart's open domain (bump support may be smaller).
bool chart_domain_contains(const Chart& chart, const ChartAtlas& atlas, const SpherePoint& x);

struct ComplexLift {
  std::complex<double> z;
  bool on_branch_chart = false;
  int sheet = +1;  // placement sign the evaluator applies to this chart's contribution
};

// Chart-local double-cover coordinate of x. For a branch chart z is the
// cut-aligned square root of the chart's conformal coordinate w (the cut
// image is the positive real axis), and z*z reproduces w. For a non-branch
// chart z is w itself.
ComplexLift lift(const Chart& chart, const ChartAtlas& atlas, const SpherePoint& x,
                 const StarGraph& graph);

}  // namespace z2eigen
