#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "z2eigen/errors.hpp"
#include "z2eigen/rng.hpp"

namespace z2eigen {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

// Tolerance for on-cut and graph-degeneracy decisions.
inline constexpr double kGeomTol = 1e-9;

inline double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  // fmod can return exactly 2*pi after the correction when theta is a tiny
  // negative number.
  if (t >= kTwoPi) t -= kTwoPi;
  return t;
}

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Point on the unit sphere in spherical coordinates: phi in [0, pi] measured
// from the north pole, theta in [0, 2*pi).
struct SpherePoint {
  double phi = 0.0;
  double theta = 0.0;

  SpherePoint() = default;
  SpherePoint(double phi_, double theta_) : phi(phi_), theta(wrap_angle(theta_)) {}

  Vec3 to_unit() const {
    const double s = std::sin(phi);
    return {s * std::cos(theta), s * std::sin(theta), std::cos(phi)};
  }

  static SpherePoint from_unit(const Vec3& x) {
    const double r = norm(x);
    const double phi = std::acos(std::clamp(x[2] / r, -1.0, 1.0));
    double theta = std::atan2(x[1], x[0]);
    return SpherePoint(phi, theta);
  }
};

inline double great_circle_distance(const SpherePoint& a, const SpherePoint& b) {
  return std::acos(std::clamp(dot(a.to_unit(), b.to_unit()), -1.0, 1.0));
}

// The 2n branch points. Point 0 is pinned at the north pole and never
// trainable; the others may move when the run trains branch positions.
struct BranchConfiguration {
  std::vector<SpherePoint> points;
  std::vector<std::uint8_t> trainable;

  std::size_t size() const { return points.size(); }

  bool has_south_pole(std::size_t* index = nullptr) const {
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i].phi >= kPi - kGeomTol) {
        if (index) *index = i;
        return true;
      }
    }
    return false;
  }

  void validate() const;
};

// One branch cut: the constant-theta great-circle arc from the north pole
// down to phi_end. A branch point at the south pole gets theta = 0 and
// phi_end = pi.
struct GraphEdge {
  double theta = 0.0;
  double phi_end = 0.0;
  std::size_t point_index = 0;  // into BranchConfiguration::points
};

struct StarGraph {
  std::vector<GraphEdge> edges;  // sorted by theta
};

StarGraph build_star_graph(const BranchConfiguration& config);

// Reference-sheet bookkeeping: parity of cut crossings along the latitude
// circle from theta = 0+ to x. The south-pole edge sits at theta = 0 and is
// never counted.
int sheet_sign(const StarGraph& graph, const SpherePoint& x);

// Great-circle distance from x to the nearest point of the graph.
double graph_distance(const SpherePoint& x, const StarGraph& graph);

struct Separation {
  // Minimum circular azimuth difference over pairs of generic (non-polar)
  // branch points, the distance measure the proximity penalty uses.
  double azimuthal = std::numeric_limits<double>::infinity();
  // Minimum great-circle distance over all branch-point pairs.
  double metric = std::numeric_limits<double>::infinity();
};

Separation min_separation(const BranchConfiguration& config, const StarGraph& graph);

// I.i.d. area-uniform points with graph_distance > exclusion_radius.
std::vector<SpherePoint> sample_sphere(Rng& rng, std::size_t count, const StarGraph& graph,
                                       double exclusion_radius);

}  // namespace z2eigen
