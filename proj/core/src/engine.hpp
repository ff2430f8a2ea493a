#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "z2eigen/chart_kernel.hpp"
#include "z2eigen/net.hpp"

// Batched jet evaluation of a TwoValuedNet: geometry jets are computed (or
// cached) per point, the per-chart networks run as 6-component-wide GEMMs
// over point blocks, and a hand-written reverse pass accumulates parameter
// gradients. Block boundaries are fixed, so reductions are bit-deterministic
// regardless of thread count.
namespace z2eigen::engine {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using WeightMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using WeightMapMut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline constexpr std::size_t kBlockSize = 256;

struct GeomEntry {
  std::uint32_t chart = 0;
  float sign = 1.0f;
  bool branch = false;
  Jet2 zx, zy, chi, rho;
};

// Chart geometry for a point list; reusable across epochs while the branch
// configuration is frozen.
struct GeomSet {
  std::vector<SpherePoint> pts;
  std::vector<GeomEntry> entries;       // grouped by point
  std::vector<std::uint32_t> start;     // size pts.size() + 1
  std::vector<double> weight;           // residual weight w(x)
  std::vector<double> cot, inv_sin2;    // Laplacian coefficients

  std::size_t size() const { return pts.size(); }
};

GeomSet compute_geometry(const TwoValuedNet& net, std::span<const SpherePoint> pts);

inline void put_jet(MatrixXd& m, int row, int col6, const Jet2& j, double s) {
  m(row, col6 + 0) = s * j.v;
  m(row, col6 + 1) = s * j.d1[0];
  m(row, col6 + 2) = s * j.d1[1];
  m(row, col6 + 3) = s * j.d2[0];
  m(row, col6 + 4) = s * j.d2[1];
  m(row, col6 + 5) = s * j.d2[2];
}

inline Jet2 get_jet(const MatrixXd& m, int row, int col6) {
  Jet2 j;
  j.v = m(row, col6 + 0);
  j.d1[0] = m(row, col6 + 1);
  j.d1[1] = m(row, col6 + 2);
  j.d2[0] = m(row, col6 + 3);
  j.d2[1] = m(row, col6 + 4);
  j.d2[2] = m(row, col6 + 5);
  return j;
}

// Adjoint of a in c = a * b (jet product), given the adjoint of c.
inline Jet2 mul_adjoint(const Jet2& ac, const Jet2& b) {
  Jet2 aa;
  aa.v = ac.v * b.v + ac.d1[0] * b.d1[0] + ac.d1[1] * b.d1[1] + ac.d2[0] * b.d2[0] +
         ac.d2[1] * b.d2[1] + ac.d2[2] * b.d2[2];
  aa.d1[0] = ac.d1[0] * b.v + 2.0 * ac.d2[0] * b.d1[0] + ac.d2[1] * b.d1[1];
  aa.d1[1] = ac.d1[1] * b.v + 2.0 * ac.d2[2] * b.d1[1] + ac.d2[1] * b.d1[0];
  aa.d2[0] = ac.d2[0] * b.v;
  aa.d2[1] = ac.d2[1] * b.v;
  aa.d2[2] = ac.d2[2] * b.v;
  return aa;
}

// Flat buffers grown to their high-water mark and viewed through Eigen maps,
// so repeated batches do not reallocate.
struct ChartWork {
  std::vector<std::uint32_t> entry_idx;  // into GeomSet::entries
  std::vector<std::uint32_t> point_loc;  // block-local point index
  int m = 0;                             // active points in this chart
  bool branch = false;
  std::vector<double> in, out;
  std::vector<std::vector<double>> pre, act, gd;  // per hidden layer
  std::vector<Jet2> odd;  // network factor per entry (odd part, or raw output)
  std::vector<Jet2> q;    // chi * rho per entry (branch charts)
  std::vector<double> adj_a, adj_b;
};

struct BlockWork {
  std::vector<ChartWork> charts;
  std::vector<Jet2> U;  // per block-local point
};

// Forward over points [p0, p1); U jets for each point. With keep_caches the
// layer activations stay around for backward_block.
void forward_block(const TwoValuedNet& net, const GeomSet& geom, std::size_t p0, std::size_t p1,
                   BlockWork& work, bool keep_caches);

// Adjoints of the geometry interface of one entry (free-branch runs).
struct GeomAdjoint {
  Jet2 zx, zy, chi, rho;
};

// Reverse pass for one block. adj_u is indexed block-locally. Parameter
// gradients accumulate into grad (TwoValuedNet flat layout; network slots
// only). When adj_geo is non-null it receives per-entry geometry adjoints.
void backward_block(const TwoValuedNet& net, const GeomSet& geom, std::size_t p0, std::size_t p1,
                    BlockWork& work, std::span<const Jet2> adj_u, std::span<double> grad,
                    std::vector<GeomAdjoint>* adj_geo);

// Convenience: forward every block (parallel), filling U for all points.
void forward_all(const TwoValuedNet& net, const GeomSet& geom, std::span<Jet2> u_out,
                 std::vector<BlockWork>& works, bool keep_caches);

}  // namespace z2eigen::engine
