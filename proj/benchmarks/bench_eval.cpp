#include <benchmark/benchmark.h>

#include "z2eigen/loss.hpp"
#include "z2eigen/net.hpp"
#include "z2eigen/presets.hpp"

using namespace z2eigen;

namespace {

TwoValuedNet make_net(const char* preset) {
  Preset p = preset_by_name(preset);
  Rng rng(1);
  return TwoValuedNet::create(p.config, LayerSpec::standard(), rng, p.train.lambda_init);
}

std::vector<SpherePoint> make_batch(const TwoValuedNet& net, std::size_t n) {
  Rng rng = Rng::substream(1, 1);
  return sample_sphere(rng, n, net.graph, 0.02);
}

void BM_jet_mul(benchmark::State& state) {
  Jet2 a = seed(0, 0.7), b = seed(1, -0.3);
  a = exp(a) * sin(b);
  for (auto _ : state) {
    Jet2 c = a * b;
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_jet_mul);

void BM_gelu_jet(benchmark::State& state) {
  Jet2 x = seed(0, 0.4) * seed(1, 1.1);
  for (auto _ : state) {
    Jet2 y = gelu(x);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_gelu_jet);

void BM_eval_point(benchmark::State& state) {
  TwoValuedNet net = make_net("tetrahedron");
  std::vector<SpherePoint> pts = make_batch(net, 64);
  std::size_t k = 0;
  for (auto _ : state) {
    Jet2 u = eval_jet(net, pts[k++ % pts.size()]);
    benchmark::DoNotOptimize(u);
  }
}
BENCHMARK(BM_eval_point);

void BM_batch_metrics(benchmark::State& state) {
  TwoValuedNet net = make_net(state.range(0) == 0 ? "antipodal" : "tetrahedron");
  std::vector<SpherePoint> pts = make_batch(net, 2048);
  for (auto _ : state) {
    Metrics m = evaluate(net, pts);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_batch_metrics)->Arg(0)->Arg(1);

void BM_gradient_step(benchmark::State& state) {
  TwoValuedNet net = make_net(state.range(0) == 0 ? "antipodal" : "tetrahedron");
  std::vector<SpherePoint> pts = make_batch(net, 2048);
  LossWeights w{10.0, 1.0, 100.0, 0.0, 2.0, true};
  std::vector<double> grad(net.layout().total);
  for (auto _ : state) {
    LossComponents c = batch_gradient(net, pts, w, 0.3, grad);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_gradient_step)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
