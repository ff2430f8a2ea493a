#include "z2eigen/sphere.hpp"

#include <algorithm>
#include <cstdio>

namespace z2eigen {

void BranchConfiguration::validate() const {
  if (points.size() < 2 || points.size() % 2 != 0)
    throw InvalidConfiguration("branch configuration must contain an even number >= 2 of points");
  if (trainable.size() != points.size())
    throw InvalidConfiguration("trainable mask size mismatch");
  if (points[0].phi > kGeomTol)
    throw InvalidConfiguration("point 0 must sit at the north pole");
  if (trainable[0])
    throw InvalidConfiguration("the north-pole branch point is never trainable");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (great_circle_distance(points[i], points[j]) < kGeomTol)
        throw InvalidConfiguration("branch points must be pairwise distinct");
    }
  }
}

StarGraph build_star_graph(const BranchConfiguration& config) {
  config.validate();
  StarGraph graph;
  graph.edges.reserve(config.points.size() - 1);
  for (std::size_t i = 1; i < config.points.size(); ++i) {
    const SpherePoint& p = config.points[i];
    GraphEdge e;
    e.point_index = i;
    if (p.phi >= kPi - kGeomTol) {
      // South pole: the cut runs along the full theta = 0 meridian.
      e.theta = 0.0;
      e.phi_end = kPi;
    } else {
      e.theta = p.theta;
      e.phi_end = p.phi;
    }
    graph.edges.push_back(e);
  }
  std::sort(graph.edges.begin(), graph.edges.end(),
            [](const GraphEdge& a, const GraphEdge& b) { return a.theta < b.theta; });
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const double a = graph.edges[i].theta;
    const double b = graph.edges[(i + 1) % graph.edges.size()].theta;
    double gap = (i + 1 == graph.edges.size()) ? (b + kTwoPi - a) : (b - a);
    if (graph.edges.size() > 1 && gap < kGeomTol) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "edges at theta = %.12g and %.12g overlap", a, b);
      throw DegenerateGraph(msg);
    }
  }
  return graph;
}

int sheet_sign(const StarGraph& graph, const SpherePoint& x) {
  if (graph_distance(x, graph) <= kGeomTol)
    throw OnCut("sheet_sign: point lies on the branch-cut graph");
  int crossings = 0;
  for (const GraphEdge& e : graph.edges) {
    if (e.theta > 0.0 && e.theta <= x.theta && x.phi < e.phi_end) ++crossings;
  }
  return (crossings % 2 == 0) ? +1 : -1;
}

namespace {

// Distance from x to one meridian arc {(phi, theta_e) : 0 <= phi <= phi_end}.
// cos(dist to arc point at phi) = A sin(phi) + B cos(phi); the optimum is
// either interior (distance to the great circle, computed through asin so
// small distances keep full precision) or at an endpoint (half-chord form).
double edge_distance(const Vec3& x, const GraphEdge& e) {
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  const double a = x[0] * ct + x[1] * st;
  const double b = x[2];
  const double phi0 = std::atan2(a, b);  // in (-pi, pi]
  if (phi0 >= 0.0 && phi0 <= e.phi_end) {
    const double n = -st * x[0] + ct * x[1];  // component along the plane normal
    return std::asin(std::clamp(std::abs(n), 0.0, 1.0));
  }
  const Vec3 top{0.0, 0.0, 1.0};
  const Vec3 bot{std::sin(e.phi_end) * ct, std::sin(e.phi_end) * st, std::cos(e.phi_end)};
  auto half_chord = [&x](const Vec3& p) {
    const double dx = x[0] - p[0], dy = x[1] - p[1], dz = x[2] - p[2];
    const double chord = std::sqrt(dx * dx + dy * dy + dz * dz);
    return 2.0 * std::asin(std::clamp(0.5 * chord, 0.0, 1.0));
  };
  return std::min(half_chord(top), half_chord(bot));
}

}  // namespace

double graph_distance(const SpherePoint& x, const StarGraph& graph) {
  const Vec3 v = x.to_unit();
  double best = kPi;
  for (const GraphEdge& e : graph.edges) best = std::min(best, edge_distance(v, e));
  return best;
}

Separation min_separation(const BranchConfiguration& config, const StarGraph& graph) {
  Separation sep;
  std::vector<double> generic_thetas;
  for (const GraphEdge& e : graph.edges) {
    if (e.phi_end < kPi - kGeomTol) generic_thetas.push_back(e.theta);
  }
  std::sort(generic_thetas.begin(), generic_thetas.end());
  if (generic_thetas.size() >= 2) {
    for (std::size_t i = 0; i < generic_thetas.size(); ++i) {
      const double a = generic_thetas[i];
      const double b = generic_thetas[(i + 1) % generic_thetas.size()];
      const double gap = (i + 1 == generic_thetas.size()) ? (b + kTwoPi - a) : (b - a);
      sep.azimuthal = std::min(sep.azimuthal, gap);
    }
  }
  for (std::size_t i = 0; i < config.points.size(); ++i) {
    for (std::size_t j = i + 1; j < config.points.size(); ++j) {
      sep.metric = std::min(sep.metric, great_circle_distance(config.points[i], config.points[j]));
    }
  }
  return sep;
}

std::vector<SpherePoint> sample_sphere(Rng& rng, std::size_t count, const StarGraph& graph,
                                       double exclusion_radius) {
  std::vector<SpherePoint> out;
  out.reserve(count);
  std::size_t draws = 0, accepts = 0;
  while (out.size() < count) {
    const double z = 1.0 - 2.0 * rng.uniform();
    const double theta = kTwoPi * rng.uniform();
    ++draws;
    const double phi = std::acos(std::clamp(z, -1.0, 1.0));
    const SpherePoint p(phi, theta);
    // Pole-collision guard: the Laplacian contraction needs sin(phi) bounded
    // away from zero. The excluded caps have area ~1e-12.
    if (std::sin(phi) < 1e-6) continue;
    if (graph_distance(p, graph) > exclusion_radius) {
      out.push_back(p);
      ++accepts;
    }
    if (draws >= 100000 && accepts * 100 < draws)
      throw SamplingStalled("sample_sphere: acceptance rate below 1%");
  }
  return out;
}

}  // namespace z2eigen
