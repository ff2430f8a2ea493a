#include "z2eigen/exporters.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "engine.hpp"

namespace z2eigen {

void export_plot_grid(const TwoValuedNet& net, int rows, int cols, const std::string& path,
                      double exclusion_radius) {
  if (rows < 2 || cols < 2) throw InvalidConfiguration("plot grid needs rows, cols >= 2");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open grid file: " + path);
  os << "phi\ttheta\tu\tresidual\tweighted_residual\n";

  std::vector<SpherePoint> pts;
  std::vector<int> kept;  // row-major cell index of each evaluated point
  pts.reserve(static_cast<std::size_t>(rows) * cols);
  kept.reserve(pts.capacity());
  std::vector<double> phis(static_cast<std::size_t>(rows)), thetas(static_cast<std::size_t>(cols));
  for (int i = 0; i < rows; ++i) phis[static_cast<std::size_t>(i)] = (i + 0.5) * kPi / rows;
  for (int j = 0; j < cols; ++j) thetas[static_cast<std::size_t>(j)] = (j + 0.5) * kTwoPi / cols;

  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const SpherePoint x(phis[static_cast<std::size_t>(i)], thetas[static_cast<std::size_t>(j)]);
      if (graph_distance(x, net.graph) > exclusion_radius) {
        kept.push_back(i * cols + j);
        pts.push_back(x);
      }
    }
  }

  engine::GeomSet geom = engine::compute_geometry(net, pts);
  std::vector<Jet2> U(pts.size());
  std::vector<engine::BlockWork> works;
  engine::forward_all(net, geom, U, works, false);

  std::size_t k = 0;
  char line[192];
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double phi = phis[static_cast<std::size_t>(i)];
      const double theta = thetas[static_cast<std::size_t>(j)];
      if (k < kept.size() && kept[k] == i * cols + j) {
        const Jet2& u = U[k];
        const double lap = -(u.d2[0] + geom.cot[k] * u.d1[0] + geom.inv_sin2[k] * u.d2[2]);
        const double resid = lap - net.lambda * u.v;
        std::snprintf(line, sizeof line, "%.9f\t%.9f\t%.12g\t%.12g\t%.12g\n", phi, theta, u.v,
                      resid, geom.weight[k] * resid);
        ++k;
      } else {
        std::snprintf(line, sizeof line, "%.9f\t%.9f\tnan\tnan\tnan\n", phi, theta);
      }
      os << line;
    }
  }
  if (!os) throw IoError("grid write failed: " + path);
}

namespace {

struct IcoMesh {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
};

Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

IcoMesh icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoMesh m;
  const double raw[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (const auto& v : raw) m.verts.push_back(normalized({v[0], v[1], v[2]}));
  m.tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
            {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
            {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
            {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3& va = m.verts[static_cast<std::size_t>(a)];
      const Vec3& vb = m.verts[static_cast<std::size_t>(b)];
      m.verts.push_back(normalized({va[0] + vb[0], va[1] + vb[1], va[2] + vb[2]}));
      const int id = static_cast<int>(m.verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.tris.size() * 4);
    for (const auto& tr : m.tris) {
      const int ab = mid(tr[0], tr[1]), bc = mid(tr[1], tr[2]), ca = mid(tr[2], tr[0]);
      next.push_back({tr[0], ab, ca});
      next.push_back({tr[1], bc, ab});
      next.push_back({tr[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.tris.swap(next);
  }
  return m;
}

// Does the great-circle segment a -> b cross the branch-cut edge e?
bool segment_crosses_edge(const Vec3& a, const Vec3& b, const GraphEdge& e) {
  const Vec3 n{-std::sin(e.theta), std::cos(e.theta), 0.0};  // meridian plane normal
  const double sa = dot(a, n), sb = dot(b, n);
  if (sa * sb >= 0.0) return false;
  // crossing point: the positive combination of the endpoints in the plane
  const double wa = std::abs(sb), wb = std::abs(sa);
  Vec3 c{wa * a[0] + wb * b[0], wa * a[1] + wb * b[1], wa * a[2] + wb * b[2]};
  c = normalized(c);
  const Vec3 md{std::cos(e.theta), std::sin(e.theta), 0.0};
  if (dot(c, md) <= 0.0) return false;  // crossed the opposite meridian
  const double phi_c = std::acos(std::clamp(c[2], -1.0, 1.0));
  return phi_c <= e.phi_end + 1e-12;
}

}  // namespace

MeshStats export_mesh(const TwoValuedNet& net, int subdivisions, const std::string& path) {
  if (subdivisions < 0) throw InvalidConfiguration("subdivisions must be >= 0");
  IcoMesh mesh = icosphere(subdivisions);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open mesh file: " + path);
  os << "# icosphere vertices: x y z u sheet; triangles: t i j k straddles_cut\n";
  os << mesh.verts.size() << " " << mesh.tris.size() << "\n";

  std::vector<int> on_graph(mesh.verts.size(), 0);
  char line[192];
  for (std::size_t v = 0; v < mesh.verts.size(); ++v) {
    const SpherePoint x = SpherePoint::from_unit(mesh.verts[v]);
    double uval = 0.0;
    int sheet = 0;
    if (graph_distance(x, net.graph) > kGeomTol) {
      uval = eval_jet(net, x).v;
      sheet = sheet_sign(net.graph, x);
    } else {
      on_graph[v] = 1;
    }
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.12g %d\n", mesh.verts[v][0],
                  mesh.verts[v][1], mesh.verts[v][2], uval, sheet);
    os << line;
  }
  for (const auto& tr : mesh.tris) {
    int straddles = on_graph[static_cast<std::size_t>(tr[0])] |
                    on_graph[static_cast<std::size_t>(tr[1])] |
                    on_graph[static_cast<std::size_t>(tr[2])];
    if (!straddles) {
      for (int k = 0; k < 3 && !straddles; ++k) {
        const Vec3& a = mesh.verts[static_cast<std::size_t>(tr[k])];
        const Vec3& b = mesh.verts[static_cast<std::size_t>(tr[(k + 1) % 3])];
        for (const GraphEdge& e : net.graph.edges) {
          if (segment_crosses_edge(a, b, e)) {
            straddles = 1;
            break;
          }
        }
      }
    }
    os << "t " << tr[0] << " " << tr[1] << " " << tr[2] << " " << straddles << "\n";
  }
  if (!os) throw IoError("mesh write failed: " + path);
  return {mesh.verts.size(), mesh.tris.size()};
}

void export_diagnostics(const TwoValuedNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open diagnostics file: " + path);
  const std::vector<double> radii{0.2, 0.1, 0.05, 0.025};
  os << "# per branch point: decay profile sup|u| on circles, ratio to r^{3/2}, and the\n";
  os << "# leading coefficient of the Re(a w^{3/2}) expansion on the r = 0.05 ring\n";
  for (std::size_t j = 0; j < net.config.size(); ++j) {
    std::vector<double> profile = decay_profile(net, j, radii);
    os << "branch_point " << j << " phi " << net.config.points[j].phi << " theta "
       << net.config.points[j].theta << "\n";
    for (std::size_t k = 0; k < radii.size(); ++k) {
      os << "  r " << radii[k] << " sup_u " << profile[k] << " ratio "
         << profile[k] / std::pow(radii[k], 1.5) << "\n";
    }
    LeadingCoefficient lc = leading_coefficient(net, j);
    os << "  leading_coefficient re " << lc.a.real() << " im " << lc.a.imag() << " abs "
       << std::abs(lc.a) << " fit_residual " << lc.fit_residual << " nondegenerate "
       << (lc.nondegenerate ? 1 : 0) << "\n";
  }
  if (!os) throw IoError("diagnostics write failed: " + path);
}

}  // namespace z2eigen
