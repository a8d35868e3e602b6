#include <benchmark/benchmark.h>

#include <random>

#include "distcox/site_summary.hpp"

using namespace distcox;

namespace {

AnalysisDataset synthetic(std::size_t n, std::size_t p, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> time_dist(1, static_cast<int>(n) / 4 + 1);
  std::bernoulli_distribution event_dist(0.5);
  std::normal_distribution<double> z_dist(0.0, 1.0);
  AnalysisDataset ds;
  ds.partner_id = 1;
  for (std::size_t a = 0; a < p; ++a)
    ds.covariate_names.push_back("z" + std::to_string(a + 1));
  for (std::size_t i = 0; i < n; ++i) {
    SubjectRecord rec;
    rec.time = time_dist(rng);
    rec.event = event_dist(rng) ? 1 : 0;
    for (std::size_t a = 0; a < p; ++a) rec.covariates.push_back(z_dist(rng));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace

// One descending sweep over the records per evaluation; the cost is
// O(N p^2) plus O(J p^2) for the per-event-time snapshots.
static void BM_site_summaries(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const std::size_t p = state.range(1);
  const AnalysisDataset ds = synthetic(n, p, 42);
  const EventTimeGrid grid = extract_local_event_times(ds);
  const Vector beta(p, 0.05);
  for (auto _ : state) {
    auto rows = compute_site_summaries(ds, beta, grid, Ties::Breslow);
    benchmark::DoNotOptimize(rows);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_site_summaries)
    ->Args({1000, 3})
    ->Args({10000, 3})
    ->Args({100000, 3})
    ->Args({10000, 10});

static void BM_site_contributions(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const AnalysisDataset ds = synthetic(n, 3, 7);
  const Vector beta(3, 0.05);
  for (auto _ : state) {
    auto scores = compute_site_contributions(ds, beta, Ties::Efron);
    benchmark::DoNotOptimize(scores);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_site_contributions)->Arg(1000)->Arg(10000)->Arg(100000);
