#include <benchmark/benchmark.h>

#include <random>

#include "riskscore/bias.hpp"
#include "riskscore/clustering.hpp"
#include "riskscore/eval.hpp"
#include "riskscore/model.hpp"
#include "riskscore/synth.hpp"

using namespace riskscore;

namespace {

const synth::SynthData& corpus_of(std::size_t clusters) {
  static std::map<std::size_t, synth::SynthData> cache;
  auto it = cache.find(clusters);
  if (it == cache.end()) {
    synth::SynthConfig sc;
    sc.num_clusters = clusters;
    it = cache.emplace(clusters, synth::generate(sc)).first;
  }
  return it->second;
}

void BM_BuildGraph(benchmark::State& state) {
  const auto& d = corpus_of(static_cast<std::size_t>(state.range(0)));
  GraphConfig cfg;
  cfg.all_pairs_cutoff = 0;
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(d.corpus, cfg));
  state.counters["docs"] = static_cast<double>(d.corpus.size());
}
BENCHMARK(BM_BuildGraph)->Arg(250)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_KwikCluster(benchmark::State& state) {
  const auto& d = corpus_of(static_cast<std::size_t>(state.range(0)));
  GraphConfig cfg;
  cfg.all_pairs_cutoff = 0;
  const auto g = build_graph(d.corpus, cfg);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(kwikcluster(g, seed++));
  state.counters["edges"] = static_cast<double>(g.edges().size());
}
BENCHMARK(BM_KwikCluster)->Arg(250)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::vector<std::pair<double, Label>> scores;
  for (int i = 0; i < state.range(0); ++i) {
    scores.emplace_back(std::uniform_real_distribution<double>(0, 1)(gen),
                        (gen() & 1) ? Label::positive : Label::negative);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_Train(benchmark::State& state) {
  const auto& d = corpus_of(static_cast<std::size_t>(state.range(0)));
  EvalConfig ec;
  for (auto _ : state) benchmark::DoNotOptimize(fit(d.labels, d.corpus, ec));
}
BENCHMARK(BM_Train)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ChiSquared(benchmark::State& state) {
  const auto t = synth::table2_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(chi_squared_test(t, 0.05));
}
BENCHMARK(BM_ChiSquared);

}  // namespace
BENCHMARK_MAIN();
