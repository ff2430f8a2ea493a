#pragma once
#include <cmath>
#include <vector>

#include "z2eigen/net.hpp"
#include "z2eigen/rng.hpp"
#include "z2eigen/sphere.hpp"

namespace z2t {

using namespace z2eigen;

inline double rel_err(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

// Area-uniform point staying clear of the graph and the poles.
inline SpherePoint random_point_off(Rng& rng, const StarGraph& graph, double clearance,
                                    double sin_floor = 0.05) {
  for (;;) {
    const double z = 1.0 - 2.0 * rng.uniform();
    const SpherePoint x(std::acos(z), kTwoPi * rng.uniform());
    if (std::sin(x.phi) < sin_floor) continue;
    if (graph_distance(x, graph) > clearance) return x;
  }
}

// Point at geodesic radius r, direction alpha from p.
inline SpherePoint circle_point(const SpherePoint& p, double r, double alpha) {
  const double cp = std::cos(p.phi), sp = std::sin(p.phi);
  const double ct = std::cos(p.theta), st = std::sin(p.theta);
  const Vec3 e1{cp * ct, cp * st, -sp};
  const Vec3 e2{-st, ct, 0.0};
  const Vec3 pv{sp * ct, sp * st, cp};
  const double cr = std::cos(r), sr = std::sin(r);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  return SpherePoint::from_unit({cr * pv[0] + sr * (ca * e1[0] + sa * e2[0]),
                                 cr * pv[1] + sr * (ca * e1[1] + sa * e2[1]),
                                 cr * pv[2] + sr * (ca * e1[2] + sa * e2[2])});
}

inline BranchConfiguration tetrahedron_config() {
  const double phi = std::acos(-1.0 / 3.0);
  BranchConfiguration c;
  c.points = {SpherePoint(0.0, 0.0), SpherePoint(phi, 0.0), SpherePoint(phi, 2.0 * kPi / 3.0),
              SpherePoint(phi, 4.0 * kPi / 3.0)};
  c.trainable = {0, 0, 0, 0};
  return c;
}

inline BranchConfiguration antipodal_config() {
  BranchConfiguration c;
  c.points = {SpherePoint(0.0, 0.0), SpherePoint(kPi, 0.0)};
  c.trainable = {0, 0};
  return c;
}

// Trainable configuration with distinct polar angles (no min-tie in the dome
// radius, so finite differences see the one-sided derivatives cleanly).
inline BranchConfiguration free_config_distinct() {
  BranchConfiguration c;
  c.points = {SpherePoint(0.0, 0.0), SpherePoint(1.82, 0.3), SpherePoint(1.95, 2.4),
              SpherePoint(1.7, 4.5)};
  c.trainable = {0, 1, 1, 1};
  return c;
}

}  // namespace z2t
