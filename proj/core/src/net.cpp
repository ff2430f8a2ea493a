#include "z2eigen/net.hpp"

#include <algorithm>
#include <cmath>

#include "z2eigen/chart_kernel.hpp"

namespace z2eigen {

TwoValuedNet TwoValuedNet::create(const BranchConfiguration& config, const LayerSpec& spec,
                                  Rng& rng, double lambda0) {
  TwoValuedNet net;
  net.config = config;
  net.graph = build_star_graph(config);
  net.atlas = build_atlas(config, net.graph);
  net.nets.reserve(net.atlas.charts.size());
  for (std::size_t c = 0; c < net.atlas.charts.size(); ++c) net.nets.push_back(he_init(rng, spec));
  net.lambda = lambda0;
  return net;
}

void TwoValuedNet::rebuild_geometry() {
  graph = build_star_graph(config);
  atlas = build_atlas(config, graph);
}

bool TwoValuedNet::any_branch_trainable() const {
  for (std::uint8_t t : config.trainable)
    if (t) return true;
  return false;
}

TwoValuedNet::Layout TwoValuedNet::layout() const {
  Layout lo;
  std::size_t off = 0;
  lo.net_offsets.reserve(nets.size());
  for (const MlpParams& p : nets) {
    lo.net_offsets.push_back(off);
    off += p.data.size();
  }
  lo.lambda_offset = off;
  off += 1;
  lo.branch_offset = off;
  for (std::size_t j = 0; j < config.size(); ++j)
    if (config.trainable[j]) lo.trainable_points.push_back(j);
  off += 2 * lo.trainable_points.size();
  lo.total = off;
  return lo;
}

std::vector<double> TwoValuedNet::pack() const {
  Layout lo = layout();
  std::vector<double> flat(lo.total);
  for (std::size_t c = 0; c < nets.size(); ++c)
    std::copy(nets[c].data.begin(), nets[c].data.end(), flat.begin() + lo.net_offsets[c]);
  flat[lo.lambda_offset] = lambda;
  for (std::size_t k = 0; k < lo.trainable_points.size(); ++k) {
    const SpherePoint& p = config.points[lo.trainable_points[k]];
    flat[lo.branch_offset + 2 * k] = p.phi;
    flat[lo.branch_offset + 2 * k + 1] = p.theta;
  }
  return flat;
}

void TwoValuedNet::unpack(std::span<const double> flat) {
  Layout lo = layout();
  for (std::size_t c = 0; c < nets.size(); ++c)
    std::copy(flat.begin() + lo.net_offsets[c], flat.begin() + lo.net_offsets[c] + nets[c].data.size(),
              nets[c].data.begin());
  lambda = flat[lo.lambda_offset];
  bool moved = false;
  for (std::size_t k = 0; k < lo.trainable_points.size(); ++k) {
    SpherePoint& p = config.points[lo.trainable_points[k]];
    double phi = flat[lo.branch_offset + 2 * k];
    double theta = flat[lo.branch_offset + 2 * k + 1];
    // The optimizer moves coordinates freely; fold back into the chart.
    phi = std::fmod(phi, kTwoPi);
    if (phi < 0.0) { phi = -phi; theta += kPi; }
    if (phi > kPi) { phi = kTwoPi - phi; theta += kPi; }
    if (phi != p.phi || theta != p.theta) moved = true;
    p.phi = phi;
    p.theta = wrap_angle(theta);
  }
  if (moved) {
    rebuild_geometry();
    if (atlas.charts.size() != nets.size())
      throw InvalidConfiguration("branch move changed the chart topology");
  }
}

std::vector<std::uint8_t> TwoValuedNet::decay_mask() const {
  Layout lo = layout();
  std::vector<std::uint8_t> mask(lo.total, 0);
  for (std::size_t c = 0; c < nets.size(); ++c) {
    const MlpParams& p = nets[c];
    for (int l = 0; l < p.spec.num_affine(); ++l) {
      const std::size_t w0 = lo.net_offsets[c] + p.weight_offset(l);
      const std::size_t nw = static_cast<std::size_t>(p.spec.widths[l + 1]) * p.spec.widths[l];
      std::fill(mask.begin() + w0, mask.begin() + w0 + nw, std::uint8_t{1});
    }
  }
  return mask;
}

namespace {

Jet2 combine_contribution(const ChartEval& geom, const MlpParams& params) {
  if (geom.branch) {
    Jet2 out_pos = forward(params, geom.zx, geom.zy);
    Jet2 out_neg = forward(params, -geom.zx, -geom.zy);
    Jet2 odd = out_pos - out_neg;
    return (odd * (geom.chi * geom.rho)) * geom.place_sign;
  }
  Jet2 val = forward(params, geom.zx, geom.zy);
  return val * geom.chi;
}

}  // namespace

Jet2 eval_chart(const TwoValuedNet& net, std::size_t chart_index, const SpherePoint& x) {
  const Chart& chart = net.atlas.charts[chart_index];
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(net.config);
  ChartParamsT<double> P = resolve_chart_params(chart, net.atlas, bc);
  ChartEval geom = chart_geometry(chart, P, net.graph, x);
  if (!geom.active) return Jet2();
  return combine_contribution(geom, net.nets[chart_index]);
}

Jet2 eval_jet(const TwoValuedNet& net, const SpherePoint& x) {
  Jet2 u;
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(net.config);
  for (std::size_t c = 0; c < net.atlas.charts.size(); ++c) {
    const Chart& chart = net.atlas.charts[c];
    ChartParamsT<double> P = resolve_chart_params(chart, net.atlas, bc);
    ChartEval geom = chart_geometry(chart, P, net.graph, x);
    if (!geom.active) continue;
    u = u + combine_contribution(geom, net.nets[c]);
  }
  return u;
}

EvalResult eval(const TwoValuedNet& net, const SpherePoint& x) {
  if (graph_distance(x, net.graph) <= kGeomTol) throw OnCut("eval: point on the branch-cut graph");
  Jet2 u = eval_jet(net, x);
  EvalResult r;
  r.u = u.v;
  r.lap_u = laplace_beltrami(u, x.phi);
  r.grad_u[0] = u.d1[0];
  r.grad_u[1] = u.d1[1];
  return r;
}

std::size_t chart_of_branch(const ChartAtlas& atlas, std::size_t branch_index) {
  for (std::size_t c = 0; c < atlas.charts.size(); ++c)
    if (atlas.charts[c].has_branch_point && atlas.charts[c].branch_index == branch_index) return c;
  throw InvalidConfiguration("no chart houses that branch point");
}

namespace {

// Points on the geodesic circle of radius r around p.
SpherePoint circle_point(const SpherePoint& p, double r, double alpha) {
  const double cp = std::cos(p.phi), sp = std::sin(p.phi);
  const double ct = std::cos(p.theta), st = std::sin(p.theta);
  const Vec3 e1{cp * ct, cp * st, -sp};
  const Vec3 e2{-st, ct, 0.0};
  const Vec3 pv{sp * ct, sp * st, cp};
  const double cr = std::cos(r), sr = std::sin(r);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Vec3 x{cr * pv[0] + sr * (ca * e1[0] + sa * e2[0]), cr * pv[1] + sr * (ca * e1[1] + sa * e2[1]),
         cr * pv[2] + sr * (ca * e1[2] + sa * e2[2])};
  return SpherePoint::from_unit(x);
}

}  // namespace

std::vector<double> decay_profile(const TwoValuedNet& net, std::size_t branch_index,
                                  std::span<const double> radii) {
  const SpherePoint p = net.config.points[branch_index];
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    double sup = 0.0;
    for (int k = 0; k < 256; ++k) {
      const double alpha = (k + 0.5) * kTwoPi / 256.0;
      const SpherePoint x = circle_point(p, r, alpha);
      sup = std::max(sup, std::abs(eval_jet(net, x).v));
    }
    out.push_back(sup);
  }
  return out;
}

std::complex<double> branch_local_lift(const TwoValuedNet& net, std::size_t branch_index,
                                       const SpherePoint& x) {
  const std::size_t c = chart_of_branch(net.atlas, branch_index);
  const Chart& chart = net.atlas.charts[c];
  BranchCoordsT<double> bc = BranchCoordsT<double>::lift(net.config);
  ChartParamsT<double> P = resolve_chart_params(chart, net.atlas, bc);
  ChartEval geom = chart_geometry(chart, P, net.graph, x, LiftMode::Force);
  return {geom.place_sign * geom.zx.v, geom.place_sign * geom.zy.v};
}

LeadingCoefficient fit_leading_coefficient(std::span<const double> u,
                                           std::span<const std::complex<double>> zeta) {
  // u ~ ar * Re(zeta^3) - ai * Im(zeta^3): 2x2 normal equations.
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::complex<double> z3 = zeta[k] * zeta[k] * zeta[k];
    const double c1 = z3.real(), c2 = -z3.imag();
    s11 += c1 * c1;
    s12 += c1 * c2;
    s22 += c2 * c2;
    b1 += c1 * u[k];
    b2 += c2 * u[k];
  }
  const double det = s11 * s22 - s12 * s12;
  const double scale = std::max(s11, s22);
  if (!(det > 1e-12 * scale * scale))
    throw FitIllConditioned("leading-coefficient fit is singular on this ring");
  const double ar = (s22 * b1 - s12 * b2) / det;
  const double ai = (s11 * b2 - s12 * b1) / det;
  LeadingCoefficient lc;
  lc.a = {ar, ai};
  double ss = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::complex<double> z3 = zeta[k] * zeta[k] * zeta[k];
    const double fit = ar * z3.real() - ai * z3.imag();
    ss += (u[k] - fit) * (u[k] - fit);
  }
  lc.fit_residual = std::sqrt(ss / static_cast<double>(u.size()));
  lc.nondegenerate = std::abs(lc.a) > 10.0 * lc.fit_residual;
  return lc;
}

LeadingCoefficient leading_coefficient(const TwoValuedNet& net, std::size_t branch_index) {
  constexpr double kRingRadius = 0.05;
  constexpr int kRingPoints = 64;
  const SpherePoint p = net.config.points[branch_index];
  std::vector<double> u;
  std::vector<std::complex<double>> zeta;
  u.reserve(kRingPoints);
  zeta.reserve(kRingPoints);
  for (int k = 0; k < kRingPoints; ++k) {
    const double alpha = (k + 0.5) * kTwoPi / kRingPoints;
    const SpherePoint x = circle_point(p, kRingRadius, alpha);
    u.push_back(eval_jet(net, x).v);
    zeta.push_back(branch_local_lift(net, branch_index, x));
  }
  return fit_leading_coefficient(u, zeta);
}

}  // namespace z2eigen
