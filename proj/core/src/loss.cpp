#include "z2eigen/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "engine.hpp"
#include "z2eigen/rtape.hpp"

namespace z2eigen {

namespace {

// Penalty as a function of the minimum azimuthal separation.
template <class T>
T penalty_from_distance(const T& d, double d0) {
  using std::isinf;
  if (std::isinf(primal(d))) return T(0.0);
  if (primal(d) <= 0.0) throw DegenerateGraph("proximity penalty at zero separation");
  T lead = T(1.0) / d - 1.0 / d0;
  if (primal(lead) <= 0.0) return T(0.0);
  T s = smooth_S_t((2.0 * d - 1.0) * (1.0 / d0));
  return lead * (1.0 - s);
}

// Adjacent pair of generic branch points realizing the minimum azimuthal
// gap; indices into config.points, or {kNoIndex, kNoIndex} when fewer than
// two generic points exist.
struct MinGapPair {
  std::size_t west = kNoIndex, east = kNoIndex;
  double gap = std::numeric_limits<double>::infinity();
};

MinGapPair min_gap_pair(const BranchConfiguration& config) {
  std::vector<std::pair<double, std::size_t>> generic;
  for (std::size_t j = 1; j < config.size(); ++j) {
    if (config.points[j].phi >= kPi - kGeomTol) continue;  // south pole
    generic.push_back({config.points[j].theta, j});
  }
  MinGapPair out;
  if (generic.size() < 2) return out;
  std::sort(generic.begin(), generic.end());
  for (std::size_t i = 0; i < generic.size(); ++i) {
    const std::size_t i2 = (i + 1) % generic.size();
    double gap = generic[i2].first - generic[i].first;
    if (i2 == 0) gap += kTwoPi;
    if (gap < out.gap) {
      out.gap = gap;
      out.west = generic[i].second;
      out.east = generic[i2].second;
    }
  }
  return out;
}

}  // namespace

double proximity_penalty(const BranchConfiguration& config, const StarGraph& graph, double d0) {
  (void)graph;
  if (!(d0 > 0.0)) throw InvalidConfiguration("proximity penalty needs d0 > 0");
  return penalty_from_distance(min_gap_pair(config).gap, d0);
}

void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                std::span<const std::uint8_t> decay_mask, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != decay_mask.size())
    throw InvalidConfiguration("adamw_step: size mismatch");
  if (!(lr > 0.0)) throw InvalidConfiguration("adamw_step: lr must be positive");
  state.t += 1;
  const double b1 = state.hp.beta1, b2 = state.hp.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NonFiniteGradient("adamw_step: non-finite gradient entry");
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    const double decay = decay_mask[i] ? state.hp.weight_decay * params[i] : 0.0;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + state.hp.eps) + decay);
  }
}

double cosine_warm_restart_lr(std::int64_t global_step, std::int64_t period, double lr_max,
                              double lr_min) {
  if (period < 1) throw InvalidConfiguration("scheduler period must be >= 1");
  const std::int64_t s = global_step % period;
  return lr_min +
         (lr_max - lr_min) * 0.5 *
             (1.0 + std::cos(kPi * static_cast<double>(s) / static_cast<double>(period)));
}

void NetField::eval_points(std::span<const SpherePoint> pts, std::span<double> u,
                           std::span<double> lap) const {
  engine::GeomSet geom = engine::compute_geometry(*net_, pts);
  std::vector<Jet2> U(pts.size());
  std::vector<engine::BlockWork> works;
  engine::forward_all(*net_, geom, U, works, false);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    u[p] = U[p].v;
    lap[p] = -(U[p].d2[0] + geom.cot[p] * U[p].d1[0] + geom.inv_sin2[p] * U[p].d2[2]);
  }
}

namespace {

struct BatchReduce {
  double rms = 0.0, wmax = 0.0, umax = 0.0;
  std::size_t p_wmax = 0, p_umax = 0;
  std::vector<double> resid;
};

BatchReduce reduce_batch(std::span<const Jet2> U, const engine::GeomSet& geom, double lambda) {
  BatchReduce r;
  const std::size_t n = U.size();
  r.resid.resize(n);
  double sum2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double lap = -(U[p].d2[0] + geom.cot[p] * U[p].d1[0] + geom.inv_sin2[p] * U[p].d2[2]);
    const double resid = lap - lambda * U[p].v;
    if (!std::isfinite(resid) || !std::isfinite(U[p].v)) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "non-finite residual at (phi, theta) = (%.9f, %.9f)", geom.pts[p].phi,
                    geom.pts[p].theta);
      throw NonFiniteLoss(msg);
    }
    r.resid[p] = resid;
    sum2 += resid * resid;
    const double wr = std::abs(geom.weight[p] * resid);
    if (wr > r.wmax) { r.wmax = wr; r.p_wmax = p; }
    const double au = std::abs(U[p].v);
    if (au > r.umax) { r.umax = au; r.p_umax = p; }
  }
  r.rms = std::sqrt(sum2 / static_cast<double>(n));
  return r;
}

LossComponents assemble_components(const BatchReduce& r, const LossWeights& w, double penalty,
                                   double lambda) {
  LossComponents out;
  out.l2 = r.rms;
  out.c0 = r.wmax;
  out.sup_u = r.umax;
  out.norm = (1.0 - r.umax) * (1.0 - r.umax);
  out.penalty = penalty;
  out.eig = w.eig_enabled ? lambda : 0.0;
  out.total = w.l2 * out.l2 + w.c0 * out.c0 + w.norm * out.norm + w.penalty * out.penalty +
              (w.eig_enabled ? w.eig * lambda : 0.0);
  return out;
}

struct GradScratch {
  std::vector<engine::BlockWork> works;
  std::vector<std::vector<double>> block_grads;
  std::vector<Jet2> U, adjU;
  std::vector<engine::GeomAdjoint> adj_geo;
  std::vector<double> adj_w;
  engine::GeomSet batch_geom;
};

// Branch-coordinate gradients: replay the chart geometry and the residual
// weight on a reverse tape per block, seed with the adjoints collected by
// the network backward pass, and sweep once.
void accumulate_branch_gradients(const TwoValuedNet& net, const engine::GeomSet& geom,
                                 const std::vector<engine::GeomAdjoint>& adj_geo,
                                 const std::vector<double>& adj_w,
                                 const TwoValuedNet::Layout& layout, std::span<double> grad) {
  using ad::Var;
  const std::size_t n = geom.size();
  const std::size_t nblocks = (n + engine::kBlockSize - 1) / engine::kBlockSize;
  std::vector<std::vector<double>> block_coord_grads(nblocks);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ib = 0; ib < static_cast<std::ptrdiff_t>(nblocks); ++ib) {
    const std::size_t b = static_cast<std::size_t>(ib);
    const std::size_t p0 = b * engine::kBlockSize;
    const std::size_t p1 = std::min(n, p0 + engine::kBlockSize);
    ad::Tape tape;
    ad::TapeScope scope(tape);

    BranchCoordsT<Var> bc;
    bc.pts.reserve(net.config.size());
    for (const SpherePoint& p : net.config.points) bc.pts.push_back({Var(p.phi), Var(p.theta)});

    std::vector<ChartParamsT<Var>> params;
    params.reserve(net.atlas.charts.size());
    for (const Chart& c : net.atlas.charts) params.push_back(resolve_chart_params(c, net.atlas, bc));

    std::vector<std::pair<int, double>> seeds;
    for (std::size_t p = p0; p < p1; ++p) {
      if (adj_w[p] != 0.0) {
        Var w = weight_w_t<Var>(bc.pts, geom.pts[p]);
        seeds.push_back({w.id, adj_w[p]});
      }
      for (std::uint32_t e = geom.start[p]; e < geom.start[p + 1]; ++e) {
        const engine::GeomEntry& ge = geom.entries[e];
        const engine::GeomAdjoint& ga = adj_geo[e];
        ChartEvalT<Var> gv =
            chart_geometry(net.atlas.charts[ge.chart], params[ge.chart], net.graph, geom.pts[p]);
        auto seed_jet = [&seeds](const Jet2T<Var>& jet, const Jet2& adj) {
          seeds.push_back({jet.v.id, adj.v});
          seeds.push_back({jet.d1[0].id, adj.d1[0]});
          seeds.push_back({jet.d1[1].id, adj.d1[1]});
          seeds.push_back({jet.d2[0].id, adj.d2[0]});
          seeds.push_back({jet.d2[1].id, adj.d2[1]});
          seeds.push_back({jet.d2[2].id, adj.d2[2]});
        };
        seed_jet(gv.zx, ga.zx);
        seed_jet(gv.zy, ga.zy);
        seed_jet(gv.chi, ga.chi);
        if (ge.branch) seed_jet(gv.rho, ga.rho);
      }
    }
    std::vector<double> bar(tape.size(), 0.0);
    for (const auto& [id, val] : seeds)
      if (id >= 0) bar[static_cast<std::size_t>(id)] += val;
    tape.backward(bar);
    std::vector<double>& cg = block_coord_grads[b];
    cg.assign(2 * layout.trainable_points.size(), 0.0);
    for (std::size_t k = 0; k < layout.trainable_points.size(); ++k) {
      const std::size_t j = layout.trainable_points[k];
      cg[2 * k] = bar[static_cast<std::size_t>(bc.pts[j][0].id)];
      cg[2 * k + 1] = bar[static_cast<std::size_t>(bc.pts[j][1].id)];
    }
  }
  for (const std::vector<double>& cg : block_coord_grads)
    for (std::size_t k = 0; k < cg.size(); ++k) grad[layout.branch_offset + k] += cg[k];
}

// Penalty gradient: closed-form chain through the minimal azimuthal gap.
void accumulate_penalty_gradient(const TwoValuedNet& net, double w_penalty, double d0,
                                 const TwoValuedNet::Layout& layout, std::span<double> grad) {
  const MinGapPair pair = min_gap_pair(net.config);
  if (pair.west == kNoIndex) return;
  const double d = pair.gap;
  if (1.0 / d - 1.0 / d0 <= 0.0) return;
  // dP/dd
  const double arg = (2.0 * d - 1.0) / d0;
  const double s = smooth_S(arg);
  double sprime = 0.0;
  if (arg > 0.0 && arg < 1.0) {
    const double ta = smooth_T(arg), tb = smooth_T(1.0 - arg);
    const double dta = ta / (arg * arg), dtb = tb / ((1.0 - arg) * (1.0 - arg));
    sprime = (dta * (ta + tb) - ta * (dta - dtb)) / ((ta + tb) * (ta + tb));
  }
  const double dP = -1.0 / (d * d) * (1.0 - s) + (1.0 / d - 1.0 / d0) * (-sprime * 2.0 / d0);
  // d(gap)/d(theta_east) = +1, d(theta_west) = -1
  for (std::size_t k = 0; k < layout.trainable_points.size(); ++k) {
    const std::size_t j = layout.trainable_points[k];
    if (j == pair.east) grad[layout.branch_offset + 2 * k + 1] += w_penalty * dP;
    if (j == pair.west) grad[layout.branch_offset + 2 * k + 1] -= w_penalty * dP;
  }
}

LossComponents gradient_impl(const TwoValuedNet& net, const engine::GeomSet& geom,
                             const LossWeights& weights, double d0, std::span<double> grad,
                             GradScratch& scratch) {
  const std::size_t n = geom.size();
  if (n == 0) throw InvalidConfiguration("batch must be non-empty");
  const TwoValuedNet::Layout layout = net.layout();
  const bool free_mode = net.any_branch_trainable();

  // Phase 1: forward with caches.
  scratch.U.assign(n, Jet2());
  const std::size_t nblocks = (n + engine::kBlockSize - 1) / engine::kBlockSize;
  if (scratch.works.size() < nblocks) scratch.works.resize(nblocks);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ib = 0; ib < static_cast<std::ptrdiff_t>(nblocks); ++ib) {
    const std::size_t b = static_cast<std::size_t>(ib);
    const std::size_t p0 = b * engine::kBlockSize;
    const std::size_t p1 = std::min(n, p0 + engine::kBlockSize);
    engine::forward_block(net, geom, p0, p1, scratch.works[b], true);
    for (std::size_t p = p0; p < p1; ++p) scratch.U[p] = scratch.works[b].U[p - p0];
  }

  BatchReduce red = reduce_batch(scratch.U, geom, net.lambda);
  const double penalty = proximity_penalty(net.config, net.graph, d0);
  LossComponents comps = assemble_components(red, weights, penalty, net.lambda);

  // Per-point adjoint seeds.
  const double inv_n = 1.0 / static_cast<double>(n);
  scratch.adjU.assign(n, Jet2());
  scratch.adj_w.assign(n, 0.0);
  double lambda_grad = weights.eig_enabled ? weights.eig : 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double a_resid = 0.0;
    if (red.rms > 0.0) a_resid += weights.l2 * red.resid[p] * inv_n / red.rms;
    if (p == red.p_wmax && red.wmax > 0.0) {
      const double sgn = geom.weight[p] * red.resid[p] >= 0.0 ? 1.0 : -1.0;
      a_resid += weights.c0 * sgn * geom.weight[p];
      scratch.adj_w[p] = weights.c0 * sgn * red.resid[p];
    }
    Jet2& a = scratch.adjU[p];
    a.v = -net.lambda * a_resid;
    a.d1[0] = -geom.cot[p] * a_resid;
    a.d2[0] = -a_resid;
    a.d2[2] = -geom.inv_sin2[p] * a_resid;
    if (p == red.p_umax && red.umax > 0.0) {
      const double sgn = scratch.U[p].v >= 0.0 ? 1.0 : -1.0;
      a.v += -2.0 * weights.norm * (1.0 - red.umax) * sgn;
    }
    lambda_grad += a_resid * (-scratch.U[p].v);
  }

  // Phase 2: backward per block into block-local gradient buffers.
  if (scratch.block_grads.size() < nblocks) scratch.block_grads.resize(nblocks);
  if (free_mode) scratch.adj_geo.assign(geom.entries.size(), engine::GeomAdjoint());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ib = 0; ib < static_cast<std::ptrdiff_t>(nblocks); ++ib) {
    const std::size_t b = static_cast<std::size_t>(ib);
    const std::size_t p0 = b * engine::kBlockSize;
    const std::size_t p1 = std::min(n, p0 + engine::kBlockSize);
    scratch.block_grads[b].assign(layout.total, 0.0);
    engine::backward_block(net, geom, p0, p1, scratch.works[b],
                           std::span<const Jet2>(scratch.adjU).subspan(p0, p1 - p0),
                           scratch.block_grads[b], free_mode ? &scratch.adj_geo : nullptr);
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t b = 0; b < nblocks; ++b)
    for (std::size_t i = 0; i < layout.total; ++i) grad[i] += scratch.block_grads[b][i];
  grad[layout.lambda_offset] = net.lambda_trainable ? lambda_grad : 0.0;

  if (free_mode) {
    accumulate_branch_gradients(net, geom, scratch.adj_geo, scratch.adj_w, layout, grad);
    accumulate_penalty_gradient(net, weights.penalty, d0, layout, grad);
  }
  for (double g : grad)
    if (!std::isfinite(g)) throw NonFiniteGradient("batch gradient has non-finite entries");
  return comps;
}

LossComponents loss_impl(const TwoValuedNet& net, std::span<const SpherePoint> batch,
                         const LossWeights& weights, double d0) {
  engine::GeomSet geom = engine::compute_geometry(net, batch);
  std::vector<Jet2> U(batch.size());
  std::vector<engine::BlockWork> works;
  engine::forward_all(net, geom, U, works, false);
  BatchReduce red = reduce_batch(U, geom, net.lambda);
  const double penalty = proximity_penalty(net.config, net.graph, d0);
  return assemble_components(red, weights, penalty, net.lambda);
}

}  // namespace

LossComponents batch_loss(const TwoValuedNet& net, std::span<const SpherePoint> batch,
                          const LossWeights& weights, double d0) {
  if (batch.empty()) throw InvalidConfiguration("batch must be non-empty");
  return loss_impl(net, batch, weights, d0);
}

LossComponents batch_loss(const PointField& field, const BranchConfiguration& config,
                          const StarGraph* graph, std::span<const SpherePoint> batch,
                          const LossWeights& weights, double d0) {
  if (batch.empty()) throw InvalidConfiguration("batch must be non-empty");
  const std::size_t n = batch.size();
  std::vector<double> u(n), lap(n);
  field.eval_points(batch, u, lap);
  BatchReduce red;
  red.resid.resize(n);
  double sum2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double resid = lap[p] - field.lambda() * u[p];
    if (!std::isfinite(resid)) throw NonFiniteLoss("non-finite residual in injected field");
    red.resid[p] = resid;
    sum2 += resid * resid;
    const double wr = std::abs(weight_w(config, batch[p]) * resid);
    if (wr > red.wmax) { red.wmax = wr; red.p_wmax = p; }
    const double au = std::abs(u[p]);
    if (au > red.umax) { red.umax = au; red.p_umax = p; }
  }
  red.rms = std::sqrt(sum2 / static_cast<double>(n));
  double penalty = 0.0;
  if (graph) penalty = proximity_penalty(config, *graph, d0);
  return assemble_components(red, weights, penalty, field.lambda());
}

LossComponents batch_gradient(const TwoValuedNet& net, std::span<const SpherePoint> batch,
                              const LossWeights& weights, double d0, std::span<double> grad) {
  if (batch.empty()) throw InvalidConfiguration("batch must be non-empty");
  GradScratch scratch;
  engine::GeomSet geom = engine::compute_geometry(net, batch);
  return gradient_impl(net, geom, weights, d0, grad, scratch);
}

Metrics evaluate(const TwoValuedNet& net, std::span<const SpherePoint> testset) {
  engine::GeomSet geom = engine::compute_geometry(net, testset);
  std::vector<Jet2> U(testset.size());
  std::vector<engine::BlockWork> works;
  engine::forward_all(net, geom, U, works, false);
  Metrics m;
  m.lambda = net.lambda;
  double sum2 = 0.0;
  for (std::size_t p = 0; p < testset.size(); ++p) {
    const double lap = -(U[p].d2[0] + geom.cot[p] * U[p].d1[0] + geom.inv_sin2[p] * U[p].d2[2]);
    const double resid = lap - net.lambda * U[p].v;
    sum2 += resid * resid;
    m.weighted_c0_residual = std::max(m.weighted_c0_residual, std::abs(geom.weight[p] * resid));
    m.sup_u = std::max(m.sup_u, std::abs(U[p].v));
  }
  m.rmse_residual = std::sqrt(sum2 / static_cast<double>(testset.size()));
  return m;
}

Metrics evaluate(const PointField& field, const BranchConfiguration& config,
                 std::span<const SpherePoint> testset) {
  const std::size_t n = testset.size();
  std::vector<double> u(n), lap(n);
  field.eval_points(testset, u, lap);
  Metrics m;
  m.lambda = field.lambda();
  double sum2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double resid = lap[p] - field.lambda() * u[p];
    sum2 += resid * resid;
    m.weighted_c0_residual =
        std::max(m.weighted_c0_residual, std::abs(weight_w(config, testset[p]) * resid));
    m.sup_u = std::max(m.sup_u, std::abs(u[p]));
  }
  m.rmse_residual = std::sqrt(sum2 / static_cast<double>(n));
  return m;
}

Dataset make_dataset(const StarGraph& graph, std::size_t train_n, std::size_t val_n,
                     std::size_t test_n, int num_batches, double exclusion_radius,
                     std::uint64_t seed) {
  if (num_batches < 1 || train_n % static_cast<std::size_t>(num_batches) != 0)
    throw InvalidConfiguration("train size must split evenly into mini-batches");
  Dataset ds;
  Rng train_rng = Rng::substream(seed, 1);
  Rng val_rng = Rng::substream(seed, 2);
  Rng test_rng = Rng::substream(seed, 3);
  ds.train = sample_sphere(train_rng, train_n, graph, exclusion_radius);
  ds.validation = sample_sphere(val_rng, val_n, graph, exclusion_radius);
  ds.test = sample_sphere(test_rng, test_n, graph, exclusion_radius);
  ds.num_batches = num_batches;
  ds.batch_size = train_n / static_cast<std::size_t>(num_batches);
  return ds;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfiguration("epochs must be >= 1");
  if (!(lr_min < lr_max)) throw InvalidConfiguration("lr_min must be below lr_max");
  if (!(d0 > 0.0)) throw InvalidConfiguration("d0 must be positive");
  if (restart_period < 1) throw InvalidConfiguration("restart period must be >= 1");
  layers.validate();
}

namespace {

// Gather cached geometry entries for a shuffled batch.
void gather_geom(const engine::GeomSet& full, std::span<const std::uint32_t> idx,
                 engine::GeomSet& out) {
  const std::size_t n = idx.size();
  out.pts.resize(n);
  out.weight.resize(n);
  out.cot.resize(n);
  out.inv_sin2.resize(n);
  out.start.assign(n + 1, 0);
  out.entries.clear();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t p = idx[k];
    out.start[k] = static_cast<std::uint32_t>(out.entries.size());
    for (std::uint32_t e = full.start[p]; e < full.start[p + 1]; ++e)
      out.entries.push_back(full.entries[e]);
    out.pts[k] = full.pts[p];
    out.weight[k] = full.weight[p];
    out.cot[k] = full.cot[p];
    out.inv_sin2[k] = full.inv_sin2[p];
  }
  out.start[n] = static_cast<std::uint32_t>(out.entries.size());
}

}  // namespace

TrainResult train(const BranchConfiguration& config, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  Rng init_rng = Rng::substream(cfg.seed, 0);
  Rng shuffle_rng = Rng::substream(cfg.seed, 4);

  TrainResult result;
  result.net = TwoValuedNet::create(config, cfg.layers, init_rng, cfg.lambda_init);
  result.net.lambda_trainable = cfg.train_lambda;
  TwoValuedNet& net = result.net;

  Dataset ds = make_dataset(net.graph, cfg.train_points, cfg.val_points, cfg.test_points,
                            cfg.num_batches, cfg.exclusion_radius, cfg.seed);

  std::vector<double> params = net.pack();
  const TwoValuedNet::Layout layout = net.layout();
  AdamWState opt(params.size(), cfg.adamw);
  std::vector<std::uint8_t> mask = net.decay_mask();

  const bool free_mode = net.any_branch_trainable();
  engine::GeomSet full_geom;
  if (!free_mode) full_geom = engine::compute_geometry(net, ds.train);

  std::vector<std::uint32_t> order(ds.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);

  GradScratch scratch;
  std::vector<double> grad(layout.total, 0.0);
  engine::GeomSet batch_geom;
  std::vector<SpherePoint> batch_pts;
  std::vector<double> last_good = params;
  int last_good_epoch = -1;

  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  try {
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double lr =
          cosine_warm_restart_lr(epoch, cfg.restart_period, cfg.lr_max, cfg.lr_min);
      double epoch_loss = 0.0;
      LossComponents last_comps;
      for (int b = 0; b < ds.num_batches; ++b) {
        std::span<const std::uint32_t> idx(order.data() + static_cast<std::size_t>(b) * ds.batch_size,
                                           ds.batch_size);
        LossComponents comps;
        if (!free_mode) {
          gather_geom(full_geom, idx, batch_geom);
          comps = gradient_impl(net, batch_geom, cfg.weights, cfg.d0, grad, scratch);
        } else {
          // The graph moves: drop points that fell into the current
          // exclusion tube, then recompute geometry.
          batch_pts.clear();
          for (std::uint32_t k : idx) {
            const SpherePoint& x = ds.train[k];
            if (graph_distance(x, net.graph) > cfg.exclusion_radius) batch_pts.push_back(x);
          }
          if (batch_pts.empty()) throw NonFiniteLoss("entire batch inside the exclusion tube");
          engine::GeomSet geom = engine::compute_geometry(net, batch_pts);
          comps = gradient_impl(net, geom, cfg.weights, cfg.d0, grad, scratch);
        }
        if (!net.lambda_trainable) grad[layout.lambda_offset] = 0.0;
        adamw_step(opt, params, grad, mask, lr);
        net.unpack(params);
        epoch_loss += comps.total;
        last_comps = comps;
      }
      // reshuffle between epochs
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
      }

      EpochMetrics em;
      em.epoch = epoch;
      em.lr = lr;
      em.train_total = epoch_loss / ds.num_batches;
      em.last_batch = last_comps;
      Metrics val = evaluate(net, ds.validation);
      em.val_rmse = val.rmse_residual;
      em.val_wc0 = val.weighted_c0_residual;
      em.val_sup_u = val.sup_u;
      em.lambda = net.lambda;
      em.min_sep_azimuthal = min_separation(net.config, net.graph).azimuthal;
      em.penalty = proximity_penalty(net.config, net.graph, cfg.d0);
      result.history.push_back(em);
      if (hooks.on_epoch) hooks.on_epoch(em);

      last_good = params;
      last_good_epoch = epoch;
      if (hooks.on_checkpoint &&
          ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
        std::ostringstream rng_text;
        rng_text << shuffle_rng.engine();
        hooks.on_checkpoint(epoch, net, opt, rng_text.str());
      }
    }
  } catch (const Error& err) {
    result.aborted = true;
    result.abort_reason = err.what();
    net.unpack(last_good);
    (void)last_good_epoch;
  }
  result.test_metrics = evaluate(net, ds.test);
  return result;
}

}  // namespace z2eigen
