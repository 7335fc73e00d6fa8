#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "spikesamp/expfam.hpp"
#include "spikesamp/network.hpp"

namespace spikesamp::fixtures {

// Small fully connected network with random kernels of support `lags`.
// Rates sit around 10-30 Hz at Δ = 10 ms so posteriors are far from trivial.
inline NetworkModel random_small_model(std::uint64_t seed, int neurons = 3, int lags = 2, double delta = 0.01,
                                       double weight_scale = 1.0, bool refractory = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(-weight_scale, weight_scale);
  std::uniform_real_distribution<double> rate(10.0, 30.0);
  std::vector<NetworkModel::Entry> entries;
  std::vector<std::vector<double>> baselines;
  for (int i = 0; i < neurons; ++i) {
    baselines.push_back({std::log(rate(rng))});
    for (int j = 0; j < neurons; ++j) {
      std::vector<double> k(lags);
      for (auto& x : k) x = w(rng);
      if (i == j && refractory) k[0] = kRefractoryWeight;
      entries.push_back({i, j, CouplingKernel(k)});
    }
  }
  return NetworkModel(neurons, delta, baselines, entries, Nonlinearity::exponential());
}

inline SpikeRaster random_raster(std::uint64_t seed, int neurons, int bins, double delta, double p = 0.2) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  SpikeRaster r(neurons, bins, delta);
  for (int i = 0; i < neurons; ++i)
    for (int t = 0; t < bins; ++t) r.set(i, t, b(rng));
  return r;
}

// The network as exponential-family chains with Poisson(exp(J) delta) emissions.
inline CoupledChainSpec poisson_spec_of(const NetworkModel& model, int bins) {
  CoupledChainSpec spec;
  spec.nodes = model.neurons();
  spec.bins = bins;
  for (int i = 0; i < spec.nodes; ++i) {
    std::vector<double> b(bins);
    for (int t = 0; t < bins; ++t) b[t] = model.baseline(i, t);
    spec.baselines.push_back(b);
    spec.families.push_back(ExpFamily::poisson_exposure(model.delta()));
  }
  for (const auto& e : model.entries()) {
    for (int l = 1; l <= e.kernel.support(); ++l) spec.couplings.push_back({e.post, e.pre, l, e.kernel.at(l)});
  }
  return spec;
}

inline NodeSeries node_series_of(const SpikeRaster& raster) {
  NodeSeries v(raster.neurons(), std::vector<double>(raster.bins()));
  for (int i = 0; i < raster.neurons(); ++i)
    for (int t = 0; t < raster.bins(); ++t) v[i][t] = raster.at(i, t);
  return v;
}

// Linear-Gaussian network with AR self terms and random cross couplings.
inline CoupledChainSpec random_gaussian_spec(std::uint64_t seed, int nodes, int bins, int lags = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(-0.4, 0.4);
  CoupledChainSpec spec;
  spec.nodes = nodes;
  spec.bins = bins;
  for (int i = 0; i < nodes; ++i) {
    std::vector<double> b(bins);
    for (auto& x : b) x = w(rng);
    spec.baselines.push_back(b);
    spec.families.push_back(ExpFamily::gaussian(0.5 + 0.5 * i));
    for (int j = 0; j < nodes; ++j)
      for (int l = 1; l <= lags; ++l) spec.couplings.push_back({i, j, l, w(rng)});
  }
  return spec;
}

}  // namespace spikesamp::fixtures
