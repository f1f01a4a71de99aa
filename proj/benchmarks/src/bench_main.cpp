#include <benchmark/benchmark.h>

#include "pcsc/config.hpp"
#include "pcsc/dataio.hpp"
#include "pcsc/diffusion.hpp"
#include "pcsc/metrics.hpp"
#include "pcsc/octree.hpp"

namespace {

using namespace pcsc;

PointCloud random_cloud(Eigen::Index n, Rng& rng) {
  PointCloud c;
  c.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) c.points(i, j) = rng.uniform(-1.0, 1.0);
  return c;
}

void BM_Chamfer(benchmark::State& state) {
  Rng rng(1);
  auto a = random_cloud(state.range(0), rng);
  auto b = random_cloud(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
}
BENCHMARK(BM_Chamfer)->Arg(256)->Arg(1024);

void BM_Emd(benchmark::State& state) {
  Rng rng(2);
  auto a = random_cloud(state.range(0), rng);
  auto b = random_cloud(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(emd(a, b));
}
BENCHMARK(BM_Emd)->Arg(64)->Arg(256);

void BM_Fps(benchmark::State& state) {
  Rng rng(3);
  auto a = random_cloud(1024, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fps(a, 64, {}));
}
BENCHMARK(BM_Fps);

void BM_OctreeRoundTrip(benchmark::State& state) {
  Rng rng(4);
  auto a = random_cloud(1024, rng);
  for (auto _ : state) {
    auto bits = octree_encode(a, 8);
    benchmark::DoNotOptimize(octree_decode(bits));
  }
}
BENCHMARK(BM_OctreeRoundTrip);

void BM_DdimToyDecode(benchmark::State& state) {
  RunConfig c = toy_preset();
  nn::ParamStore store;
  Rng rng(5);
  CpcBackbone backbone(store, "cpc", c.backbone, rng);
  auto schedule = linear_beta_schedule(c.diffusion_T, c.beta_start, c.beta_end);
  nn::Matrix f = nn::Matrix::Random(1, c.encoder.d);
  auto tau = make_subsequence(schedule.T, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Rng step_rng(6);
    benchmark::DoNotOptimize(ddim_sample(backbone, f, schedule, tau,
                                         DdimSigma::kDeterministic, 256,
                                         step_rng));
  }
}
BENCHMARK(BM_DdimToyDecode)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
