#include "z2eigen/atlas.hpp"

#include <algorithm>
#include <cstdio>

#include "z2eigen/chart_kernel.hpp"

namespace z2eigen {

namespace {

struct WallEntry {
  double theta;
  std::size_t index;
  bool is_south_edge;
};

}  // namespace

ChartAtlas build_atlas(const BranchConfiguration& config, const StarGraph& graph) {
  ChartAtlas atlas;
  atlas.config = config;

  std::size_t south_index = kNoIndex;
  {
    std::size_t s;
    if (config.has_south_pole(&s)) south_index = s;
  }
  atlas.south_has_branch = south_index != kNoIndex;
  atlas.south_branch_index = south_index;

  // Dome radii: as large as possible without touching another branch point,
  // shrunk by the relative margin.
  atlas.north_radius_argmin = kNoIndex;
  for (std::size_t j = 1; j < config.size(); ++j) {
    if (atlas.north_radius_argmin == kNoIndex ||
        config.points[j].phi < config.points[atlas.north_radius_argmin].phi)
      atlas.north_radius_argmin = j;
  }
  atlas.south_radius_argmin = kNoIndex;
  for (std::size_t j = 0; j < config.size(); ++j) {
    if (j == south_index) continue;
    if (atlas.south_radius_argmin == kNoIndex ||
        kPi - config.points[j].phi < kPi - config.points[atlas.south_radius_argmin].phi)
      atlas.south_radius_argmin = j;
  }

  // Azimuth walls: the generic branch points plus, when present, the south
  // cut at theta = 0.
  std::vector<WallEntry> walls;
  for (std::size_t j = 1; j < config.size(); ++j) {
    if (j == south_index) continue;
    walls.push_back({config.points[j].theta, j, false});
  }
  if (south_index != kNoIndex) walls.push_back({0.0, south_index, true});
  std::sort(walls.begin(), walls.end(),
            [](const WallEntry& a, const WallEntry& b) { return a.theta < b.theta; });

  auto neighbors = [&](double theta, std::size_t self_index, const Chart& /*unused*/, Chart& chart) {
    if (walls.size() < 2) {
      chart.west_index = chart.east_index = kNoIndex;
      return;
    }
    // position of self in the sorted wall list
    std::size_t pos = 0;
    for (std::size_t k = 0; k < walls.size(); ++k) {
      if (walls[k].index == self_index && std::abs(walls[k].theta - theta) < 1e-15) pos = k;
    }
    const WallEntry& west = walls[(pos + walls.size() - 1) % walls.size()];
    const WallEntry& east = walls[(pos + 1) % walls.size()];
    chart.west_index = west.index;
    chart.west_is_south_edge = west.is_south_edge;
    chart.east_index = east.index;
    chart.east_is_south_edge = east.is_south_edge;
  };

  Chart north;
  north.kind = ChartKind::NorthDome;
  north.center = SpherePoint(0.0, 0.0);
  north.has_branch_point = true;
  north.branch_index = 0;
  atlas.charts.push_back(north);

  // Slices in branch-point order so the chart <-> network binding stays
  // stable when trainable points move.
  for (std::size_t j = 1; j < config.size(); ++j) {
    if (j == south_index) continue;
    Chart slice;
    slice.kind = ChartKind::OrangeSlice;
    slice.center = config.points[j];
    slice.has_branch_point = true;
    slice.branch_index = j;
    neighbors(config.points[j].theta, j, slice, slice);
    atlas.charts.push_back(slice);
  }

  Chart south;
  south.center = SpherePoint(kPi, 0.0);
  if (atlas.south_has_branch) {
    south.kind = ChartKind::SouthDomeWithSlice;
    south.has_branch_point = true;
    south.branch_index = south_index;
    neighbors(0.0, south_index, south, south);
  } else {
    south.kind = ChartKind::SouthDome;
  }
  atlas.charts.push_back(south);

  // Snapshot the derived parameters as primal doubles.
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(config);
  atlas.north_dome_radius = detail::north_dome_radius(atlas, bc);
  atlas.south_dome_radius = detail::south_dome_radius(atlas, bc);
  for (Chart& c : atlas.charts) {
    ChartParamsT<double> P = resolve_chart_params(c, atlas, bc);
    switch (c.kind) {
      case ChartKind::NorthDome:
        c.dome_radius = atlas.north_dome_radius;
        break;
      case ChartKind::SouthDome:
      case ChartKind::SouthDomeWithSlice:
        c.dome_radius = atlas.south_dome_radius;
        c.theta_center = 0.0;
        c.gap_west = P.gap_west;
        c.gap_east = P.gap_east;
        break;
      case ChartKind::OrangeSlice:
        c.theta_center = P.theta_center;
        c.gap_west = P.gap_west;
        c.gap_east = P.gap_east;
        break;
    }
  }

  // Probe the bump-weighted cover.
  const int rows = 256, cols = 512;
  std::vector<ChartParamsT<double>> params;
  params.reserve(atlas.charts.size());
  for (const Chart& c : atlas.charts) params.push_back(resolve_chart_params(c, atlas, bc));
  for (int i = 0; i < rows; ++i) {
    const double phi = (i + 0.5) * kPi / rows;
    for (int j = 0; j < cols; ++j) {
      const double theta = (j + 0.5) * kTwoPi / cols;
      const SpherePoint x(phi, theta);
      double total = 0.0;
      for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
        ChartEval ev = chart_geometry(atlas.charts[c], params[c], graph, x, LiftMode::ChiOnly);
        if (ev.active) total += ev.chi.v;
      }
      if (!(total > 0.0)) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "no chart covers (phi, theta) = (%.6f, %.6f)", phi, theta);
        throw CoverageFailure(msg);
      }
    }
  }
  return atlas;
}

bool chart_domain_contains(const Chart& chart, const ChartAtlas& atlas, const SpherePoint& x) {
  switch (chart.kind) {
    case ChartKind::NorthDome:
      return x.phi < chart.dome_radius;
    case ChartKind::SouthDome:
      return x.phi > kPi - chart.dome_radius;
    case ChartKind::SouthDomeWithSlice: {
      if (x.phi > kPi - chart.dome_radius) return true;
      const double delta = x.theta <= chart.gap_east ? x.theta : x.theta - kTwoPi;
      return delta > -chart.gap_west && delta < chart.gap_east && x.phi > 0.0;
    }
    case ChartKind::OrangeSlice: {
      double delta = wrap_angle(x.theta - chart.theta_center);
      if (delta > chart.gap_east) delta -= kTwoPi;
      return delta > -chart.gap_west && delta < chart.gap_east && x.phi > 0.0 && x.phi < kPi;
    }
  }
  return false;
  (void)atlas;
}

ComplexLift lift(const Chart& chart, const ChartAtlas& atlas, const SpherePoint& x,
                 const StarGraph& graph) {
  if (!chart_domain_contains(chart, atlas, x)) throw OutsideChart("lift: point outside the chart domain");
  if (chart.has_branch_point) {
    const SpherePoint bp = chart.kind == ChartKind::NorthDome ? SpherePoint(0.0, 0.0)
                           : chart.kind == ChartKind::SouthDomeWithSlice
                               ? SpherePoint(kPi, 0.0)
                               : chart.center;
    if (great_circle_distance(bp, x) < 1e-12) throw AtBranchPoint("lift: at the branch point");
  }
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(atlas.config);
  ChartParamsT<double> P = resolve_chart_params(chart, atlas, bc);
  ChartEval ev = chart_geometry(chart, P, graph, x, LiftMode::Force);
  ComplexLift out;
  out.z = {ev.zx.v, ev.zy.v};
  out.on_branch_chart = chart.has_branch_point;
  out.sheet = static_cast<int>(ev.place_sign);
  return out;
}

}  // namespace z2eigen
