#include "z2eigen/bump.hpp"

#include "z2eigen/chart_kernel.hpp"

namespace z2eigen {

Jet2 bump(const Chart& chart, const ChartAtlas& atlas, const StarGraph& graph,
          const SpherePoint& x) {
  if (!chart_domain_contains(chart, atlas, x))
    throw OutsideChart("bump: point outside the chart domain");
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(atlas.config);
  ChartParamsT<double> P = resolve_chart_params(chart, atlas, bc);
  ChartEval ev = chart_geometry(chart, P, graph, x, LiftMode::ChiOnly);
  return ev.chi;
}

double bump_cover_total(const ChartAtlas& atlas, const StarGraph& graph, const SpherePoint& x) {
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(atlas.config);
  double total = 0.0;
  for (const Chart& c : atlas.charts) {
    ChartParamsT<double> P = resolve_chart_params(c, atlas, bc);
    ChartEval ev = chart_geometry(c, P, graph, x, LiftMode::ChiOnly);
    if (ev.active) total += ev.chi.v;
  }
  return total;
}

double weight_w(const BranchConfiguration& config, const SpherePoint& x) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(config.points.size());
  for (const SpherePoint& p : config.points) pts.push_back({p.phi, p.theta});
  return weight_w_t<double>(pts, x);
}

}  // namespace z2eigen
