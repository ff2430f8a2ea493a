#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "z2eigen/net.hpp"

namespace z2eigen {

struct LossWeights {
  double l2 = 10.0;
  double c0 = 1.0;
  double norm = 100.0;
  double penalty = 0.0;
  double eig = 0.0;
  bool eig_enabled = false;
};

struct LossComponents {
  double total = 0.0;
  double l2 = 0.0;       // RMS of (lap u - lambda u)
  double c0 = 0.0;       // max |w * residual|
  double norm = 0.0;     // (1 - max|u|)^2
  double penalty = 0.0;  // branch-point proximity
  double eig = 0.0;      // lambda (0 when disabled)
  double sup_u = 0.0;
};

// max(0, 1/d - 1/d0) * (1 - S((2d - 1)/d0)) with d the minimum azimuthal
// separation of the generic branch points. Zero for d > d0, of order 1/d as
// d -> 0.
double proximity_penalty(const BranchConfiguration& config, const StarGraph& graph, double d0);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.004;
};

struct AdamWState {
  AdamWConfig hp;
  std::vector<double> m, v;
  std::int64_t t = 0;

  AdamWState() = default;
  explicit AdamWState(std::size_t n, AdamWConfig cfg = {}) : hp(cfg), m(n, 0.0), v(n, 0.0) {}
};

// Decoupled weight decay: p -= lr * (mhat/(sqrt(vhat)+eps) + wd*p), decay
// applied only where decay_mask is set.
void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                std::span<const std::uint8_t> decay_mask, double lr);

double cosine_warm_restart_lr(std::int64_t global_step, std::int64_t period, double lr_max,
                              double lr_min);

// Candidate eigenfunctions that are not networks (analytic oracles) run
// through the same loss and metrics via this interface.
class PointField {
 public:
  virtual ~PointField() = default;
  virtual double lambda() const = 0;
  virtual void eval_points(std::span<const SpherePoint> pts, std::span<double> u,
                           std::span<double> lap) const = 0;
};

class NetField final : public PointField {
 public:
  explicit NetField(const TwoValuedNet& net) : net_(&net) {}
  double lambda() const override { return net_->lambda; }
  void eval_points(std::span<const SpherePoint> pts, std::span<double> u,
                   std::span<double> lap) const override;

 private:
  const TwoValuedNet* net_;
};

LossComponents batch_loss(const TwoValuedNet& net, std::span<const SpherePoint> batch,
                          const LossWeights& weights, double d0);
LossComponents batch_loss(const PointField& field, const BranchConfiguration& config,
                          const StarGraph* graph, std::span<const SpherePoint> batch,
                          const LossWeights& weights, double d0);

// Loss plus d(total)/d(every trainable scalar) in the net's flat layout.
LossComponents batch_gradient(const TwoValuedNet& net, std::span<const SpherePoint> batch,
                              const LossWeights& weights, double d0, std::span<double> grad);

struct Metrics {
  double rmse_residual = 0.0;
  double weighted_c0_residual = 0.0;
  double sup_u = 0.0;
  double lambda = 0.0;
};

Metrics evaluate(const TwoValuedNet& net, std::span<const SpherePoint> testset);
Metrics evaluate(const PointField& field, const BranchConfiguration& config,
                 std::span<const SpherePoint> testset);

struct Dataset {
  std::vector<SpherePoint> train, validation, test;
  int num_batches = 0;
  std::size_t batch_size = 0;
};

// Disjoint substreams for the three splits; train_n must divide evenly into
// num_batches batches.
Dataset make_dataset(const StarGraph& graph, std::size_t train_n, std::size_t val_n,
                     std::size_t test_n, int num_batches, double exclusion_radius,
                     std::uint64_t seed);

struct TrainConfig {
  std::size_t train_points = 524288;
  std::size_t val_points = 8192;
  std::size_t test_points = 16384;
  int num_batches = 256;
  int epochs = 5000;
  int restart_period = 1000;
  double lr_max = 1e-3;
  double lr_min = 1e-4;
  double exclusion_radius = 0.02;
  double d0 = 0.3;
  LossWeights weights;
  AdamWConfig adamw;
  double lambda_init = 4.0;
  bool train_lambda = true;
  std::uint64_t seed = 1;
  LayerSpec layers;
  int checkpoint_every = 1000;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_total = 0.0;  // epoch average of the batch loss
  LossComponents last_batch;
  double val_rmse = 0.0;
  double val_wc0 = 0.0;
  double val_sup_u = 0.0;
  double lambda = 0.0;
  double min_sep_azimuthal = 0.0;
  double penalty = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  // Called on the checkpoint cadence and once at the end. rng_state is the
  // textual state of the shuffle stream at that point.
  std::function<void(int epoch, const TwoValuedNet&, const AdamWState&, const std::string& rng_state)>
      on_checkpoint;
};

struct TrainResult {
  TwoValuedNet net;
  std::vector<EpochMetrics> history;
  Metrics test_metrics;
  bool aborted = false;
  std::string abort_reason;
};

TrainResult train(const BranchConfiguration& config, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace z2eigen
