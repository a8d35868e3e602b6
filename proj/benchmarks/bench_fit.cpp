#include <benchmark/benchmark.h>

#include <random>

#include "distcox/orchestrate.hpp"

using namespace distcox;

namespace {

AnalysisDataset synthetic_cohort(std::size_t n, std::size_t p, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> time_dist(1, 52);
  std::normal_distribution<double> z_dist(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AnalysisDataset ds;
  ds.partner_id = 1;
  for (std::size_t a = 0; a < p; ++a)
    ds.covariate_names.push_back("z" + std::to_string(a + 1));
  for (std::size_t i = 0; i < n; ++i) {
    SubjectRecord rec;
    rec.time = time_dist(rng);
    rec.event = u(rng) < 0.3 ? 1 : 0;
    for (std::size_t a = 0; a < p; ++a) rec.covariates.push_back(z_dist(rng));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

ModelSpec bench_spec(std::size_t p) {
  ModelSpec spec;
  spec.dependent_var = "t";
  spec.censoring_var = "c";
  for (std::size_t a = 0; a < p; ++a)
    spec.independent_vars.push_back("z" + std::to_string(a + 1));
  return spec;
}

}  // namespace

static void BM_pooled_fit(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const std::size_t p = state.range(1);
  const AnalysisDataset ds = synthetic_cohort(n, p, 3);
  const ModelSpec spec = bench_spec(p);
  for (auto _ : state) {
    RunOutputs out = run_pooled(ds, spec);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_pooled_fit)->Args({1000, 3})->Args({10000, 3})->Args({10000, 8});
