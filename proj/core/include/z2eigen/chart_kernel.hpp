#pragma once
#include <array>
#include <cmath>
#include <vector>

#include "z2eigen/atlas.hpp"
#include "z2eigen/jet.hpp"
#include "z2eigen/rtape.hpp"
#include "z2eigen/step.hpp"

namespace z2eigen {

// Branch-point coordinates in the scalar type of the evaluation. With
// T = ad::Var the chart geometry records onto the active tape so the loss
// gradient can flow back into trainable branch positions.
template <class T>
struct BranchCoordsT {
  std::vector<std::array<T, 2>> pts;  // (phi, theta)

  static BranchCoordsT lift(const BranchConfiguration& config) {
    BranchCoordsT out;
    out.pts.reserve(config.points.size());
    for (const SpherePoint& p : config.points) out.pts.push_back({T(p.phi), T(p.theta)});
    return out;
  }
};

template <class T>
struct ChartParamsT {
  ChartKind kind = ChartKind::NorthDome;
  // Orthonormal frame at the housed branch point (slices only).
  T e1[3]{}, e2[3]{}, pc[3]{};
  T theta_center{};
  T gap_west{}, gap_east{};
  T wall_band{};
  T ncap_lo{}, ncap_hi{};  // rising polar cap in phi
  T scap_lo{}, scap_hi{};  // falling polar cap in phi
  T dome_lo{}, dome_hi{};  // dome rim band in phi
  double phi_branch = 0.0;
  bool has_south_cap = false;
};

namespace detail {

template <class T>
T north_dome_radius(const ChartAtlas& atlas, const BranchCoordsT<T>& bc) {
  return bc.pts[atlas.north_radius_argmin][0] * (1.0 - kDomeMargin);
}

template <class T>
T south_dome_radius(const ChartAtlas& atlas, const BranchCoordsT<T>& bc) {
  return (T(kPi) - bc.pts[atlas.south_radius_argmin][0]) * (1.0 - kDomeMargin);
}

// Positive azimuth gap from `from` going east (ccw) to `to`, using the
// primal values to pick the 2*pi branch so derivatives stay exact.
template <class T>
T east_gap(const T& from, const T& to) {
  double k = std::floor((primal(to) - primal(from)) / kTwoPi);
  T gap = to - from - k * kTwoPi;
  if (primal(gap) <= 0.0) gap = gap + kTwoPi;
  if (primal(gap) > kTwoPi) gap = gap - kTwoPi;
  return gap;
}

}  // namespace detail

template <class T>
ChartParamsT<T> resolve_chart_params(const Chart& chart, const ChartAtlas& atlas,
                                     const BranchCoordsT<T>& bc) {
  using std::cos;
  using std::sin;
  ChartParamsT<T> P;
  P.kind = chart.kind;
  switch (chart.kind) {
    case ChartKind::NorthDome: {
      T R = detail::north_dome_radius(atlas, bc);
      P.dome_lo = R * (1.0 - kRimBandFraction);
      P.dome_hi = R;
      break;
    }
    case ChartKind::SouthDome: {
      T R = detail::south_dome_radius(atlas, bc);
      P.dome_lo = T(kPi) - R;
      P.dome_hi = T(kPi) - R * (1.0 - kRimBandFraction);
      break;
    }
    case ChartKind::OrangeSlice: {
      const auto& c = bc.pts[chart.branch_index];
      T cp = cos(c[0]), sp = sin(c[0]), ct = cos(c[1]), st = sin(c[1]);
      P.e1[0] = cp * ct; P.e1[1] = cp * st; P.e1[2] = -sp;
      P.e2[0] = -st;     P.e2[1] = ct;      P.e2[2] = T(0.0);
      P.pc[0] = sp * ct; P.pc[1] = sp * st; P.pc[2] = cp;
      P.theta_center = c[1];
      P.phi_branch = primal(c[0]);
      if (chart.west_index != kNoIndex)
        P.gap_west = detail::east_gap(chart.west_is_south_edge ? T(0.0) : bc.pts[chart.west_index][1],
                                      c[1]);
      else
        P.gap_west = T(kPi);
      if (chart.east_index != kNoIndex)
        P.gap_east = detail::east_gap(c[1], chart.east_is_south_edge ? T(0.0)
                                                                     : bc.pts[chart.east_index][1]);
      else
        P.gap_east = T(kPi);
      P.wall_band = (P.gap_west + P.gap_east) * (0.5 * kRimBandFraction);
      T Rn = detail::north_dome_radius(atlas, bc);
      P.ncap_lo = Rn * kCapLoFraction;
      P.ncap_hi = Rn * kCapHiFraction;
      T Rs = detail::south_dome_radius(atlas, bc);
      P.scap_lo = T(kPi) - Rs * kCapHiFraction;
      P.scap_hi = T(kPi) - Rs * kCapLoFraction;
      P.has_south_cap = true;
      break;
    }
    case ChartKind::SouthDomeWithSlice: {
      T R = detail::south_dome_radius(atlas, bc);
      P.dome_lo = T(kPi) - R;
      P.dome_hi = T(kPi) - R * (1.0 - kRimBandFraction);
      P.theta_center = T(0.0);
      P.phi_branch = kPi;
      if (chart.west_index != kNoIndex)
        P.gap_west = detail::east_gap(bc.pts[chart.west_index][1], T(0.0));
      else
        P.gap_west = T(kPi);
      if (chart.east_index != kNoIndex)
        P.gap_east = detail::east_gap(T(0.0), bc.pts[chart.east_index][1]);
      else
        P.gap_east = T(kPi);
      P.wall_band = (P.gap_west + P.gap_east) * (0.5 * kRimBandFraction);
      T Rn = detail::north_dome_radius(atlas, bc);
      P.ncap_lo = Rn * kCapLoFraction;
      P.ncap_hi = Rn * kCapHiFraction;
      break;
    }
  }
  return P;
}

// Geometry of one chart at one point, as jets in global (phi, theta):
// network inputs (zx, zy), bump chi, decay factor rho = |w|, and the +-1
// placement sign putting the contribution on the reference sheet.
template <class T>
struct ChartEvalT {
  bool active = false;
  bool branch = false;
  double place_sign = 1.0;
  Jet2T<T> zx, zy, chi, rho;
};

using ChartEval = ChartEvalT<double>;

namespace detail {

// Cut-aligned square root of w = (a, b) with |w| = rho: z lies in the closed
// upper half plane, jumps across the positive real axis. Stable on both
// sides of the negative real axis.
template <class T>
void half_angle_root(const Jet2T<T>& a, const Jet2T<T>& b, const Jet2T<T>& rho, Jet2T<T>& zx,
                     Jet2T<T>& zy) {
  if (primal(a.v) >= 0.0) {
    const double s = primal(b.v) >= 0.0 ? 1.0 : -1.0;
    zx = sqrt((rho + a) * 0.5) * s;
    zy = b / (zx * 2.0);
  } else {
    zy = sqrt((rho - a) * 0.5);
    zx = b / (zy * 2.0);
  }
}

inline int north_dome_place_sign(const StarGraph& graph, double theta) {
  int crossings = 0;
  for (const GraphEdge& e : graph.edges)
    if (e.theta > 0.0 && e.theta <= theta) ++crossings;
  return crossings % 2 == 0 ? +1 : -1;
}

}  // namespace detail

enum class LiftMode {
  ChiOnly,   // bump only; never touches the double-cover coordinate
  IfActive,  // full geometry where the bump is positive
  Force,     // full geometry anywhere in the chart domain (lift())
};

template <class T>
ChartEvalT<T> chart_geometry(const Chart& chart, const ChartParamsT<T>& P, const StarGraph& graph,
                             const SpherePoint& x, LiftMode mode = LiftMode::IfActive) {
  using std::cos;
  using std::sin;
  ChartEvalT<T> out;
  const Jet2T<T> jphi = seed(0, T(x.phi));
  const Jet2T<T> jtheta = seed(1, T(x.theta));

  switch (chart.kind) {
    case ChartKind::NorthDome: {
      out.chi = step_down_jet(jphi, P.dome_lo, P.dome_hi);
      out.active = primal(out.chi.v) > 0.0;
      if (mode == LiftMode::ChiOnly || (!out.active && mode != LiftMode::Force)) return out;
      out.branch = true;
      out.rho = sin(jphi) / (1.0 + cos(jphi));  // tan(phi/2) = |w|
      if (primal(out.rho.v) < 1e-12) throw AtBranchPoint("north dome: at the branch point");
      Jet2T<T> sq = sqrt(out.rho);
      Jet2T<T> half = jtheta * 0.5;
      out.zx = sq * cos(half);
      out.zy = sq * sin(half);
      out.place_sign = detail::north_dome_place_sign(graph, x.theta);
      return out;
    }
    case ChartKind::SouthDome: {
      out.chi = step_up_jet(jphi, P.dome_lo, P.dome_hi);
      out.active = primal(out.chi.v) > 0.0;
      if (mode == LiftMode::ChiOnly || (!out.active && mode != LiftMode::Force)) return out;
      Jet2T<T> c = sin(jphi) / (1.0 - cos(jphi));  // cot(phi/2), w = cot(phi/2) e^{-i theta}
      out.zx = c * cos(jtheta);
      out.zy = -(c * sin(jtheta));
      return out;
    }
    case ChartKind::SouthDomeWithSlice: {
      Jet2T<T> dome = step_up_jet(jphi, P.dome_lo, P.dome_hi);
      const double ge = primal(P.gap_east), gw = primal(P.gap_west);
      const double delta = x.theta <= ge ? x.theta : x.theta - kTwoPi;  // offset from theta = 0
      Jet2T<T> slice;  // zero unless inside the straddling slice
      if (delta > -gw && delta < ge) {
        Jet2T<T> jt = seed(1, T(delta));
        Jet2T<T> w1 = step_up_jet(jt, -P.gap_west, -P.gap_west + P.wall_band);
        Jet2T<T> w2 = step_down_jet(jt, P.gap_east - P.wall_band, P.gap_east);
        Jet2T<T> cap = step_up_jet(jphi, P.ncap_lo, P.ncap_hi);
        slice = w1 * w2 * cap;
      }
      out.chi = 1.0 - (1.0 - dome) * (1.0 - slice);
      out.active = primal(out.chi.v) > 0.0;
      if (mode == LiftMode::ChiOnly || (!out.active && mode != LiftMode::Force)) return out;
      out.branch = true;
      out.rho = sin(jphi) / (1.0 - cos(jphi));  // cot(phi/2) = |w|
      if (primal(out.rho.v) < 1e-12) throw AtBranchPoint("south chart: at the branch point");
      Jet2T<T> sq = sqrt(out.rho);
      Jet2T<T> half = jtheta * 0.5;
      out.zx = -(sq * cos(half));
      out.zy = sq * sin(half);
      return out;
    }
    case ChartKind::OrangeSlice: {
      const double ge = primal(P.gap_east), gw = primal(P.gap_west);
      double delta = wrap_angle(x.theta - primal(P.theta_center));
      if (delta > ge) delta -= kTwoPi;
      if (!(delta > -gw && delta < ge)) return out;  // outside the lune
      const double k2pi = delta - (x.theta - primal(P.theta_center));  // multiple of 2*pi
      Jet2T<T> jt = seed(1, T(x.theta) - P.theta_center + k2pi);
      Jet2T<T> chi = step_up_jet(jt, -P.gap_west, -P.gap_west + P.wall_band) *
                     step_down_jet(jt, P.gap_east - P.wall_band, P.gap_east);
      chi = chi * step_up_jet(jphi, P.ncap_lo, P.ncap_hi);
      if (P.has_south_cap) chi = chi * step_down_jet(jphi, P.scap_lo, P.scap_hi);
      if (std::abs(delta) > kAntipodeGuardLo) {
        const double sgn = delta >= 0.0 ? 1.0 : -1.0;
        chi = chi * step_down_jet(jt * sgn, T(kAntipodeGuardLo), T(kAntipodeGuardHi));
      }
      out.chi = chi;
      out.active = primal(out.chi.v) > 0.0;
      if (mode == LiftMode::ChiOnly || (!out.active && mode != LiftMode::Force)) return out;

      // Conformal coordinate centred at the branch point: stereographic from
      // the antipode, rotated so the cut image is the positive real axis.
      Jet2T<T> sphi = sin(jphi), cphi = cos(jphi), sth = sin(jtheta), cth = cos(jtheta);
      Jet2T<T> xv0 = sphi * cth, xv1 = sphi * sth, xv2 = cphi;
      Jet2T<T> X1 = scale(xv0, P.e1[0]) + scale(xv1, P.e1[1]) + scale(xv2, P.e1[2]);
      Jet2T<T> X2 = scale(xv0, P.e2[0]) + scale(xv1, P.e2[1]) + scale(xv2, P.e2[2]);
      Jet2T<T> X3 = scale(xv0, P.pc[0]) + scale(xv1, P.pc[1]) + scale(xv2, P.pc[2]);
      Jet2T<T> inv = reciprocal(1.0 + X3);
      Jet2T<T> a = -(X1 * inv);
      Jet2T<T> b = -(X2 * inv);
      out.rho = sqrt((1.0 - X3) * inv);
      if (primal(out.rho.v) < 1e-12) throw AtBranchPoint("slice: at the branch point");
      detail::half_angle_root(a, b, out.rho, out.zx, out.zy);
      out.branch = true;
      out.place_sign = (std::abs(delta) > kPi && x.phi < kPi - P.phi_branch) ? -1.0 : 1.0;
      return out;
    }
  }
  return out;
}

}  // namespace z2eigen
