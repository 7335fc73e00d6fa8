#include <benchmark/benchmark.h>

#include <map>

#include "spikesamp/calcium.hpp"
#include "spikesamp/experiments.hpp"
#include "spikesamp/exact_hmm.hpp"
#include "spikesamp/hybrid.hpp"
#include "spikesamp/mh.hpp"
#include "spikesamp/proposals.hpp"

using namespace spikesamp;

namespace {

struct Instance {
  NetworkModel model;
  SpikeRaster raster;
};

const Instance& toy(int bins) {
  static std::map<int, Instance> cache;
  auto it = cache.find(bins);
  if (it == cache.end()) {
    auto model = build_random_network(NetworkGenConfig::toy(), 1);
    auto raster = simulate(model, bins, 2);
    it = cache.emplace(bins, Instance{std::move(model), std::move(raster)}).first;
  }
  return it->second;
}

const Instance& standard() {
  static const Instance inst = [] {
    auto model = build_random_network(NetworkGenConfig{}, 1);
    auto raster = simulate(model, 5000, 2);
    return Instance{std::move(model), std::move(raster)};
  }();
  return inst;
}

}  // namespace

static void BM_BackwardFilter(benchmark::State& state) {
  const auto& in = toy(static_cast<int>(state.range(0)));
  const auto chain = build_conditional_chain(in.model, 0, in.raster);
  for (auto _ : state) {
    BackwardFilter f(chain);
    benchmark::DoNotOptimize(f.log_normalizer());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackwardFilter)->Arg(500)->Arg(5000);

static void BM_WeakCouplingProposal(benchmark::State& state) {
  const auto& in = standard();
  const Block block{0, static_cast<int>(state.range(0))};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto trace = sample_proposal({ProposalKind::weak_coupling, 0.0}, in.model, 0, in.raster, block, ++seed);
    benchmark::DoNotOptimize(trace.log_q);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeakCouplingProposal)->Arg(1000)->Arg(5000);

static void BM_HybridProposal(benchmark::State& state) {
  const auto& in = standard();
  const Block block{0, static_cast<int>(state.range(0))};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto trace = hybrid_proposal_sample(in.model, 0, in.raster, HybridConfig{}, block, ++seed);
    benchmark::DoNotOptimize(trace.log_q);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HybridProposal)->Arg(1000);

static void BM_CalciumMixture(benchmark::State& state) {
  const auto& in = standard();
  const auto cal = calcium_preset("esnr5");
  const auto sim = simulate_calcium(in.raster.row(0), cal, in.model.delta(), 3);
  CalciumConfig cfg;
  cfg.model = cal;
  const Block block{0, static_cast<int>(state.range(0))};
  // Construction runs the backward mixture recursion over the truncated chain.
  for (auto _ : state) {
    CalciumProposal prop(in.model, 0, in.raster, block, sim.trace, cfg);
    benchmark::DoNotOptimize(prop.mixture().total_components());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CalciumMixture)->Arg(500)->Arg(1000);

// One sweep over a single hidden neuron of the default network (10 s).
static void BM_ChainSweep(benchmark::State& state) {
  const auto& in = standard();
  SamplerConfig sc;
  sc.kind = static_cast<SamplerKind>(state.range(0));
  sc.block_length = 1000;
  const auto factory = make_factory(sc, 5.0);
  ChainConfig cfg = chain_config(sc, 1);
  cfg.burn_in = 0;
  cfg.samples = 1;
  const std::vector<int> hidden{0};
  for (auto _ : state) {
    auto res = run_chain(in.model, in.raster, hidden, cfg, factory.get(), nullptr, {}, false);
    benchmark::DoNotOptimize(res.stats.accepted);
  }
  state.SetLabel(to_string(sc.kind));
}
BENCHMARK(BM_ChainSweep)
    ->Arg(static_cast<int>(SamplerKind::homogeneous))
    ->Arg(static_cast<int>(SamplerKind::weak_coupling))
    ->Arg(static_cast<int>(SamplerKind::hybrid))
    ->Arg(static_cast<int>(SamplerKind::gibbs))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
