#include <vector>

#include <benchmark/benchmark.h>

#include "glab/fixtures.hpp"
#include "glab/processes.hpp"
#include "glab/rng.hpp"
#include "glab/samplers.hpp"
#include "glab/scorenet.hpp"
#include "glab/stats.hpp"

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  glab::RandomStream rng(seed, 0);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_TransformedScore(benchmark::State& state) {
  const glab::Gmm1D g = glab::fixture("example4").conditional(0);
  double x = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(g.transformed_score(x, 0.9, 0.19));
    x = x > 3.0 ? -2.0 : x + 1e-3;
  }
}
BENCHMARK(BM_TransformedScore);

void BM_DdpmStep(benchmark::State& state) {
  const glab::ForwardProcess vp = glab::VpSchedule();
  double x = 0.3;
  for (auto _ : state) {
    x = glab::ddpm_step(x, 0.5, 1e-3, -x, vp, 0.1);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_DdpmStep);

void BM_DdimStep(benchmark::State& state) {
  const glab::ForwardProcess vp = glab::VpSchedule();
  double x = 0.3;
  for (auto _ : state) {
    x = glab::ddim_step(x, 0.5, 1e-3, -x, vp);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_DdimStep);

void BM_LangevinStep(benchmark::State& state) {
  glab::RandomStream rng(1, 0);
  double x = 0.3;
  for (auto _ : state) {
    x = glab::langevin_step(x, 0.01, {-x, -2.0 * x}, 3.0, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_LangevinStep);

void BM_KsTwoSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = normals(n, 1);
  const auto b = normals(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(glab::ks_two_sample(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsTwoSample)->Range(1 << 10, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_ScoreNetForward(benchmark::State& state) {
  glab::ScoreNetArch arch;
  const glab::ScoreNet net = glab::ScoreNet::initialized(arch, glab::ProcessConfig{}, 3, 1000, false);
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x, 0.4));
    x = x > 2.0 ? -2.0 : x + 1e-3;
  }
}
BENCHMARK(BM_ScoreNetForward);

void BM_ChainCe1(benchmark::State& state) {
  const glab::ConditionalModel m = glab::fixture("counterexample1");
  glab::SamplerSpec spec;
  spec.variant = glab::Variant::CfgDdpm;
  spec.gamma = 3.0;
  spec.steps = 1000;
  spec.chains = 1000;
  spec.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(glab::run_sampler(spec, m).values.size());
  state.SetItemsProcessed(state.iterations() * 1000 * 1000);
}
BENCHMARK(BM_ChainCe1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
