#pragma once
#include <string>

#include "z2eigen/net.hpp"

namespace z2eigen {

// Tab-delimited grid of (phi, theta, u, residual, weighted_residual) at cell
// centres. Points on the branch-cut graph or inside the exclusion tube carry
// "nan" in the value columns.
void export_plot_grid(const TwoValuedNet& net, int rows, int cols, const std::string& path,
                      double exclusion_radius = 0.02);

struct MeshStats {
  std::size_t vertices = 0;
  std::size_t triangles = 0;
};

// Icosphere with 20 * 4^subdivisions triangles. Vertex lines carry
// (x, y, z, u, sheet); sheet is 0 for vertices on the branch locus.
// Triangle lines carry the three vertex indices and a flag set when the
// triangle straddles a branch cut.
MeshStats export_mesh(const TwoValuedNet& net, int subdivisions, const std::string& path);

// Decay profiles over dyadic radii and the leading w^{3/2} coefficient at
// every branch point.
void export_diagnostics(const TwoValuedNet& net, const std::string& path);

}  // namespace z2eigen
