#include "engine.hpp"

#include <atomic>
#include <cmath>

namespace z2eigen::engine {

GeomSet compute_geometry(const TwoValuedNet& net, std::span<const SpherePoint> pts) {
  GeomSet gs;
  gs.pts.assign(pts.begin(), pts.end());
  const std::size_t n = pts.size();
  gs.start.assign(n + 1, 0);
  gs.weight.resize(n);
  gs.cot.resize(n);
  gs.inv_sin2.resize(n);

  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(net.config);
  std::vector<ChartParamsT<double>> params;
  params.reserve(net.atlas.charts.size());
  for (const Chart& c : net.atlas.charts) params.push_back(resolve_chart_params(c, net.atlas, bc));
  std::vector<std::array<double, 2>> bpts;
  bpts.reserve(net.config.size());
  for (const SpherePoint& p : net.config.points) bpts.push_back({p.phi, p.theta});

  std::vector<std::vector<GeomEntry>> per_point(n);
  std::atomic<bool> failed{false};
  std::string first_error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ip = 0; ip < static_cast<std::ptrdiff_t>(n); ++ip) {
    const std::size_t p = static_cast<std::size_t>(ip);
    const SpherePoint& x = pts[p];
    try {
      for (std::size_t c = 0; c < net.atlas.charts.size(); ++c) {
        ChartEval ev = chart_geometry(net.atlas.charts[c], params[c], net.graph, x);
        if (!ev.active) continue;
        GeomEntry e;
        e.chart = static_cast<std::uint32_t>(c);
        e.sign = static_cast<float>(ev.place_sign);
        e.branch = ev.branch;
        e.zx = ev.zx;
        e.zy = ev.zy;
        e.chi = ev.chi;
        e.rho = ev.rho;
        per_point[p].push_back(e);
      }
      gs.weight[p] = weight_w_t<double>(bpts, x);
      const double s = std::sin(x.phi);
      gs.cot[p] = std::cos(x.phi) / s;
      gs.inv_sin2[p] = 1.0 / (s * s);
    } catch (const Error& e) {
      if (!failed.exchange(true)) first_error = e.what();
    }
  }
  if (failed) throw NonFiniteLoss("geometry failure: " + first_error);
  std::size_t total = 0;
  for (std::size_t p = 0; p < n; ++p) total += per_point[p].size();
  gs.entries.reserve(total);
  for (std::size_t p = 0; p < n; ++p) {
    gs.start[p] = static_cast<std::uint32_t>(gs.entries.size());
    for (const GeomEntry& e : per_point[p]) gs.entries.push_back(e);
  }
  gs.start[n] = static_cast<std::uint32_t>(gs.entries.size());
  return gs;
}

namespace {

using MatMap = Eigen::Map<MatrixXd>;
using ConstMatMap = Eigen::Map<const MatrixXd>;

MatMap map_buf(std::vector<double>& buf, std::size_t rows, std::size_t cols) {
  if (buf.size() < rows * cols) buf.resize(rows * cols);
  return MatMap(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void put_jet_buf(MatMap& m, int row, int col6, const Jet2& j, double s) {
  m(row, col6 + 0) = s * j.v;
  m(row, col6 + 1) = s * j.d1[0];
  m(row, col6 + 2) = s * j.d1[1];
  m(row, col6 + 3) = s * j.d2[0];
  m(row, col6 + 4) = s * j.d2[1];
  m(row, col6 + 5) = s * j.d2[2];
}

Jet2 get_jet_buf(const MatMap& m, int row, int col6) {
  Jet2 j;
  j.v = m(row, col6 + 0);
  j.d1[0] = m(row, col6 + 1);
  j.d1[1] = m(row, col6 + 2);
  j.d2[0] = m(row, col6 + 3);
  j.d2[1] = m(row, col6 + 4);
  j.d2[2] = m(row, col6 + 5);
  return j;
}

void gelu_jet_pass(MatMap pre, MatMap act, MatMap gd) {
  const int n = static_cast<int>(pre.rows());
  const int groups = static_cast<int>(pre.cols()) / 6;
  for (int q = 0; q < groups; ++q) {
    const int c = 6 * q;
    for (int u = 0; u < n; ++u) {
      const double xv = pre(u, c);
      const GeluDerivs g = gelu_derivs(xv);
      const double d1a = pre(u, c + 1), d1b = pre(u, c + 2);
      act(u, c) = g.g0;
      act(u, c + 1) = g.g1 * d1a;
      act(u, c + 2) = g.g1 * d1b;
      act(u, c + 3) = g.g2 * d1a * d1a + g.g1 * pre(u, c + 3);
      act(u, c + 4) = g.g2 * d1a * d1b + g.g1 * pre(u, c + 4);
      act(u, c + 5) = g.g2 * d1b * d1b + g.g1 * pre(u, c + 5);
      gd(3 * u + 0, q) = g.g1;
      gd(3 * u + 1, q) = g.g2;
      gd(3 * u + 2, q) = g.g3;
    }
  }
}

void gelu_jet_vjp(const MatMap pre, const MatMap gd, MatMap adj) {
  const int n = static_cast<int>(pre.rows());
  const int groups = static_cast<int>(pre.cols()) / 6;
  for (int q = 0; q < groups; ++q) {
    const int c = 6 * q;
    for (int u = 0; u < n; ++u) {
      const double g1 = gd(3 * u + 0, q), g2 = gd(3 * u + 1, q), g3 = gd(3 * u + 2, q);
      const double d1a = pre(u, c + 1), d1b = pre(u, c + 2);
      const double ay_v = adj(u, c), ay_a = adj(u, c + 1), ay_b = adj(u, c + 2);
      const double ay_aa = adj(u, c + 3), ay_ab = adj(u, c + 4), ay_bb = adj(u, c + 5);
      adj(u, c) = ay_v * g1 + g2 * (ay_a * d1a + ay_b * d1b) +
                  ay_aa * (g3 * d1a * d1a + g2 * pre(u, c + 3)) +
                  ay_ab * (g3 * d1a * d1b + g2 * pre(u, c + 4)) +
                  ay_bb * (g3 * d1b * d1b + g2 * pre(u, c + 5));
      adj(u, c + 1) = ay_a * g1 + 2.0 * g2 * d1a * ay_aa + g2 * d1b * ay_ab;
      adj(u, c + 2) = ay_b * g1 + 2.0 * g2 * d1b * ay_bb + g2 * d1a * ay_ab;
      adj(u, c + 3) = ay_aa * g1;
      adj(u, c + 4) = ay_ab * g1;
      adj(u, c + 5) = ay_bb * g1;
    }
  }
}

}  // namespace

void forward_block(const TwoValuedNet& net, const GeomSet& geom, std::size_t p0, std::size_t p1,
                   BlockWork& work, bool keep_caches) {
  const std::size_t ncharts = net.atlas.charts.size();
  if (work.charts.size() != ncharts) work.charts.assign(ncharts, ChartWork{});
  const std::size_t np = p1 - p0;
  work.U.assign(np, Jet2());

  for (std::size_t c = 0; c < ncharts; ++c) {
    ChartWork& cw = work.charts[c];
    cw.entry_idx.clear();
    cw.point_loc.clear();
    cw.branch = false;
    for (std::size_t p = p0; p < p1; ++p) {
      for (std::uint32_t e = geom.start[p]; e < geom.start[p + 1]; ++e) {
        if (geom.entries[e].chart != c) continue;
        cw.entry_idx.push_back(e);
        cw.point_loc.push_back(static_cast<std::uint32_t>(p - p0));
        cw.branch = geom.entries[e].branch;
      }
    }
    cw.m = static_cast<int>(cw.entry_idx.size());
    if (cw.m == 0) continue;

    const MlpParams& mp = net.nets[c];
    const int L = mp.spec.num_affine();
    const int m = cw.m;
    const int groups = cw.branch ? 2 * m : m;
    const std::size_t ncols = 6 * static_cast<std::size_t>(groups);

    if (static_cast<int>(cw.pre.size()) != L - 1) {
      cw.pre.assign(static_cast<std::size_t>(L - 1), {});
      cw.act.assign(static_cast<std::size_t>(L - 1), {});
      cw.gd.assign(static_cast<std::size_t>(L - 1), {});
    }

    MatMap in = map_buf(cw.in, 2, ncols);
    for (int k = 0; k < m; ++k) {
      const GeomEntry& ge = geom.entries[cw.entry_idx[static_cast<std::size_t>(k)]];
      put_jet_buf(in, 0, 6 * k, ge.zx, 1.0);
      put_jet_buf(in, 1, 6 * k, ge.zy, 1.0);
      if (cw.branch) {
        put_jet_buf(in, 0, 6 * (m + k), ge.zx, -1.0);
        put_jet_buf(in, 1, 6 * (m + k), ge.zy, -1.0);
      }
    }

    std::vector<double>* cur_buf = &cw.in;
    int cur_rows = 2;
    for (int l = 0; l < L; ++l) {
      const int n_in = mp.spec.widths[static_cast<std::size_t>(l)];
      const int n_out = mp.spec.widths[static_cast<std::size_t>(l) + 1];
      WeightMap W(mp.weights(l), n_out, n_in);
      Eigen::Map<const VectorXd> b(mp.biases(l), n_out);
      MatMap cur = map_buf(*cur_buf, static_cast<std::size_t>(cur_rows), ncols);
      MatMap dst = (l == L - 1)
                       ? map_buf(cw.out, static_cast<std::size_t>(n_out), ncols)
                       : map_buf(cw.pre[static_cast<std::size_t>(l)], static_cast<std::size_t>(n_out), ncols);
      dst.noalias() = W * cur;
      for (int qcol = 0; qcol < groups; ++qcol) dst.col(6 * qcol) += b;
      if (l == L - 1) break;
      MatMap act = map_buf(cw.act[static_cast<std::size_t>(l)], static_cast<std::size_t>(n_out), ncols);
      MatMap gd = map_buf(cw.gd[static_cast<std::size_t>(l)], 3 * static_cast<std::size_t>(n_out),
                          static_cast<std::size_t>(groups));
      gelu_jet_pass(dst, act, gd);
      cur_buf = &cw.act[static_cast<std::size_t>(l)];
      cur_rows = n_out;
    }

    MatMap out = map_buf(cw.out, 1, ncols);
    cw.odd.resize(static_cast<std::size_t>(m));
    cw.q.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const GeomEntry& ge = geom.entries[cw.entry_idx[static_cast<std::size_t>(k)]];
      Jet2 contrib;
      if (cw.branch) {
        Jet2 diff = get_jet_buf(out, 0, 6 * k) - get_jet_buf(out, 0, 6 * (m + k));
        Jet2 qj = ge.chi * ge.rho;
        contrib = (diff * qj) * static_cast<double>(ge.sign);
        cw.odd[static_cast<std::size_t>(k)] = diff;
        cw.q[static_cast<std::size_t>(k)] = qj;
      } else {
        Jet2 val = get_jet_buf(out, 0, 6 * k);
        contrib = val * ge.chi;
        cw.odd[static_cast<std::size_t>(k)] = val;
      }
      Jet2& U = work.U[cw.point_loc[static_cast<std::size_t>(k)]];
      U = U + contrib;
    }
    (void)keep_caches;
  }
}

void backward_block(const TwoValuedNet& net, const GeomSet& geom, std::size_t p0, std::size_t p1,
                    BlockWork& work, std::span<const Jet2> adj_u, std::span<double> grad,
                    std::vector<GeomAdjoint>* adj_geo) {
  (void)p0;
  (void)p1;
  const TwoValuedNet::Layout layout = net.layout();
  for (std::size_t c = 0; c < work.charts.size(); ++c) {
    ChartWork& cw = work.charts[c];
    if (cw.m == 0) continue;
    const MlpParams& mp = net.nets[c];
    const int L = mp.spec.num_affine();
    const int m = cw.m;
    const int groups = cw.branch ? 2 * m : m;
    const std::size_t ncols = 6 * static_cast<std::size_t>(groups);

    std::vector<double>* cur_buf = &cw.adj_a;
    std::vector<double>* nxt_buf = &cw.adj_b;
    int cur_rows = 1;
    MatMap adj_seed = map_buf(cw.adj_a, 1, ncols);
    for (int k = 0; k < m; ++k) {
      const std::size_t ke = cw.entry_idx[static_cast<std::size_t>(k)];
      const GeomEntry& ge = geom.entries[ke];
      const Jet2& au = adj_u[cw.point_loc[static_cast<std::size_t>(k)]];
      if (cw.branch) {
        Jet2 a_scaled = au * static_cast<double>(ge.sign);
        Jet2 adj_diff = mul_adjoint(a_scaled, cw.q[static_cast<std::size_t>(k)]);
        put_jet_buf(adj_seed, 0, 6 * k, adj_diff, 1.0);
        put_jet_buf(adj_seed, 0, 6 * (m + k), adj_diff, -1.0);
        if (adj_geo) {
          Jet2 adj_q = mul_adjoint(a_scaled, cw.odd[static_cast<std::size_t>(k)]);
          GeomAdjoint& ga = (*adj_geo)[ke];
          ga.chi = mul_adjoint(adj_q, ge.rho);
          ga.rho = mul_adjoint(adj_q, ge.chi);
        }
      } else {
        Jet2 adj_val = mul_adjoint(au, ge.chi);
        put_jet_buf(adj_seed, 0, 6 * k, adj_val, 1.0);
        if (adj_geo) {
          GeomAdjoint& ga = (*adj_geo)[ke];
          ga.chi = mul_adjoint(au, cw.odd[static_cast<std::size_t>(k)]);
        }
      }
    }

    // The adjoint of the current layer's (post-bias) output walks the affine
    // layers down to the input, ping-ponging between the two scratch buffers.
    for (int l = L - 1; l >= 0; --l) {
      const int n_in = mp.spec.widths[static_cast<std::size_t>(l)];
      const int n_out = mp.spec.widths[static_cast<std::size_t>(l) + 1];
      WeightMap W(mp.weights(l), n_out, n_in);
      MatMap adj_cur = map_buf(*cur_buf, static_cast<std::size_t>(cur_rows), ncols);
      MatMap below = (l == 0) ? map_buf(cw.in, 2, ncols)
                              : map_buf(cw.act[static_cast<std::size_t>(l) - 1],
                                        static_cast<std::size_t>(n_in), ncols);
      double* gbase = grad.data() + layout.net_offsets[c];
      WeightMapMut gW(gbase + mp.weight_offset(l), n_out, n_in);
      Eigen::Map<VectorXd> gb(gbase + mp.bias_offset(l), n_out);
      gW.noalias() += adj_cur * below.transpose();
      for (int qcol = 0; qcol < groups; ++qcol) gb += adj_cur.col(6 * qcol);
      if (l == 0 && !adj_geo) break;  // input adjoints only needed for free runs
      MatMap adj_prev = map_buf(*nxt_buf, static_cast<std::size_t>(n_in), ncols);
      adj_prev.noalias() = W.transpose() * adj_cur;
      if (l > 0)
        gelu_jet_vjp(map_buf(cw.pre[static_cast<std::size_t>(l) - 1],
                             static_cast<std::size_t>(n_in), ncols),
                     map_buf(cw.gd[static_cast<std::size_t>(l) - 1],
                             3 * static_cast<std::size_t>(n_in), static_cast<std::size_t>(groups)),
                     adj_prev);
      std::swap(cur_buf, nxt_buf);
      cur_rows = n_in;
    }

    if (adj_geo) {
      MatMap adj_in = map_buf(*cur_buf, 2, ncols);
      for (int k = 0; k < m; ++k) {
        const std::size_t ke = cw.entry_idx[static_cast<std::size_t>(k)];
        GeomAdjoint& ga = (*adj_geo)[ke];
        Jet2 azx = get_jet_buf(adj_in, 0, 6 * k);
        Jet2 azy = get_jet_buf(adj_in, 1, 6 * k);
        if (cw.branch) {
          azx = azx - get_jet_buf(adj_in, 0, 6 * (m + k));
          azy = azy - get_jet_buf(adj_in, 1, 6 * (m + k));
        }
        ga.zx = azx;
        ga.zy = azy;
      }
    }
  }
}

void forward_all(const TwoValuedNet& net, const GeomSet& geom, std::span<Jet2> u_out,
                 std::vector<BlockWork>& works, bool keep_caches) {
  const std::size_t n = geom.size();
  const std::size_t nblocks = (n + kBlockSize - 1) / kBlockSize;
  if (works.size() < nblocks) works.resize(nblocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ib = 0; ib < static_cast<std::ptrdiff_t>(nblocks); ++ib) {
    const std::size_t b = static_cast<std::size_t>(ib);
    const std::size_t p0 = b * kBlockSize;
    const std::size_t p1 = std::min(n, p0 + kBlockSize);
    forward_block(net, geom, p0, p1, works[b], keep_caches);
    for (std::size_t p = p0; p < p1; ++p) u_out[p] = works[b].U[p - p0];
  }
}

}  // namespace z2eigen::engine
