#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spikesamp/nonlinearity.hpp"
#include "spikesamp/random.hpp"

namespace spikesamp {

// Self-weight used to realize absolute refractoriness. Finite so the rate
// stays computable; inputs this negative fall under kHardInputThreshold.
inline constexpr double kRefractoryWeight = -1e6;

// Half-open bin range [begin, end).
struct Block {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
  bool contains(int t) const { return t >= begin && t < end; }
  friend bool operator==(const Block&, const Block&) = default;
};

// Strictly causal lag kernel; weights()[l - 1] is the weight at lag l bins.
class CouplingKernel {
 public:
  CouplingKernel() = default;
  explicit CouplingKernel(std::vector<double> weights);

  int support() const { return static_cast<int>(weights_.size()); }
  double at(int lag) const { return lag >= 1 && lag <= support() ? weights_[lag - 1] : 0.0; }
  std::span<const double> weights() const { return weights_; }
  bool is_zero() const;

  CouplingKernel truncated(int max_lag) const;
  CouplingKernel scaled(double c) const;

  friend bool operator==(const CouplingKernel&, const CouplingKernel&) = default;

 private:
  std::vector<double> weights_;
};

// Binary N x T spike indicator matrix, stored row-major per neuron.
class SpikeRaster {
 public:
  SpikeRaster() = default;
  SpikeRaster(int neurons, int bins, double delta);

  int neurons() const { return neurons_; }
  int bins() const { return bins_; }
  double delta() const { return delta_; }

  std::uint8_t at(int i, int t) const { return bits_[index(i, t)]; }
  // 0 for bins before the recording (silent pre-window).
  std::uint8_t at_or_silent(int i, int t) const { return t < 0 ? 0 : bits_[index(i, t)]; }
  void set(int i, int t, bool spike) { bits_[index(i, t)] = spike ? 1 : 0; }

  std::span<const std::uint8_t> row(int i) const;
  std::span<std::uint8_t> row(int i);

  long spike_count(int i) const;
  long spike_count() const;

  friend bool operator==(const SpikeRaster&, const SpikeRaster&) = default;

 private:
  std::size_t index(int i, int t) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(bins_) + static_cast<std::size_t>(t);
  }

  int neurons_ = 0;
  int bins_ = 0;
  double delta_ = 0.0;
  std::vector<std::uint8_t> bits_;
};

// Coupled-GLM network: J_i(t) = b_i(t) + sum_j sum_{t'<t} w_ij(t - t') n_j(t'),
// n_i(t) ~ Bernoulli(f(J_i(t)) Δ). Immutable after construction.
class NetworkModel {
 public:
  // A presynaptic (incoming) or postsynaptic (outgoing) link of one neuron.
  struct Link {
    int neuron;
    const CouplingKernel* kernel;
  };

  struct Entry {
    int post;  // i in w_ij
    int pre;   // j in w_ij
    CouplingKernel kernel;
  };

  // baselines[i] holds either one value (constant drive) or a per-bin series.
  // Missing self-kernels are added as empty kernels.
  NetworkModel(int neurons, double delta, std::vector<std::vector<double>> baselines,
               std::vector<Entry> kernels, Nonlinearity nonlinearity);
  NetworkModel(const NetworkModel& other);
  NetworkModel(NetworkModel&& other) noexcept;
  NetworkModel& operator=(const NetworkModel& other);
  NetworkModel& operator=(NetworkModel&& other) noexcept;

  int neurons() const { return neurons_; }
  double delta() const { return delta_; }
  const Nonlinearity& nonlinearity() const { return nonlinearity_; }
  // Maximal lag index over all kernels.
  int max_lag() const { return max_lag_; }

  double baseline(int i, int t) const;
  const std::vector<double>& baseline_series(int i) const { return baselines_[i]; }
  // Shortest per-bin baseline series, or nullopt when every baseline is constant.
  std::optional<int> baseline_horizon() const;

  const CouplingKernel& self_kernel(int i) const;
  // w_ij, or nullptr when neuron j does not project to i.
  const CouplingKernel* kernel(int i, int j) const;

  // All j with w_ij present (including i itself).
  std::span<const Link> incoming(int i) const { return incoming_[i]; }
  // All j != i with w_ji present.
  std::span<const Link> outgoing(int i) const { return outgoing_[i]; }

  // Largest lag through which n_i influences any input (self or postsynaptic).
  int influence_lag(int i) const;

  const std::vector<Entry>& entries() const { return entries_; }

  // Copy with cross and self weights scaled by c; refractory weights are kept.
  NetworkModel with_coupling_scale(double c) const;
  NetworkModel with_baselines(std::vector<std::vector<double>> baselines) const;

 private:
  void index_links();

  int neurons_;
  double delta_;
  std::vector<std::vector<double>> baselines_;
  std::vector<Entry> entries_;
  Nonlinearity nonlinearity_;
  int max_lag_ = 0;
  std::vector<int> self_index_;
  std::vector<std::vector<Link>> incoming_;
  std::vector<std::vector<Link>> outgoing_;
};

struct NetworkGenConfig {
  int neurons = 50;
  double delta = 0.002;
  double fraction_excitatory = 0.8;
  double connection_probability = 0.1;
  double coupling_time_constant = 0.010;
  // Kernels are cut off after this many seconds.
  double coupling_support = 0.050;
  double absolute_refractory = 0.002;
  double self_inhibition_timescale = 0.010;
  double self_support = 0.010;
  // Peak log-rate amplitude of the exponential self-inhibition.
  double self_inhibition_amplitude = 1.0;
  // Mean peak amplitudes of excitatory / inhibitory kernels (log-rate units).
  double excitatory_weight = 0.25;
  double inhibitory_weight = 0.5;
  double target_rate = 5.0;
  double coupling_scale = 1.0;
  // Baseline tuning: pilot length in seconds and accepted relative rate error.
  double pilot_duration = 5.0;
  double rate_tolerance = 0.1;

  // Settings of the short-kernel network used for exact comparisons.
  static NetworkGenConfig toy();
};

NetworkModel build_random_network(const NetworkGenConfig& cfg, std::uint64_t seed);

// Same as build_random_network, additionally returning neuron types and the
// rate reached by the baseline tuning.
struct GeneratedNetwork {
  NetworkModel model;
  std::vector<bool> excitatory;
  double pilot_rate = 0.0;
};
GeneratedNetwork generate_network(const NetworkGenConfig& cfg, std::uint64_t seed);

// J_i(t) by direct summation over all kernels and lags.
double total_input(const NetworkModel& model, const SpikeRaster& raster, int i, int t);

// J_i(t) for t in [t0, t1), computed by scattering spikes through kernels.
// Contributions from presynaptic neuron `exclude` are omitted when >= 0.
std::vector<double> input_series(const NetworkModel& model, const SpikeRaster& raster, int i,
                                 int t0, int t1, int exclude = -1, bool with_baseline = true);

struct SimulationResult {
  SpikeRaster raster;
  long clamped_bins = 0;
};

SimulationResult simulate_network(const NetworkModel& model, int bins, std::uint64_t seed);
SpikeRaster simulate(const NetworkModel& model, int bins, std::uint64_t seed);

// Sum over all neurons and bins of the per-bin spike log-mass.
double log_joint(const NetworkModel& model, const SpikeRaster& raster,
                 JointForm form = JointForm::bernoulli);

// Restricted sum over the listed neurons and bins [t0, t1).
double log_joint_terms(const NetworkModel& model, const SpikeRaster& raster,
                       std::span<const int> neurons, int t0, int t1,
                       JointForm form = JointForm::bernoulli);

}  // namespace spikesamp
