#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spikesamp/network.hpp"
#include "spikesamp/random.hpp"

namespace spikesamp {

// The last K spike bins of one neuron packed into an integer.
// Bit l (bit 0 = most recent bin) stores n(t - l).
struct StateCode {
  std::uint32_t code = 0;
  int order = 1;

  std::uint32_t mask() const { return order >= 32 ? 0xFFFFFFFFu : (1u << order) - 1u; }
  StateCode append(bool spike) const { return {((code << 1) | (spike ? 1u : 0u)) & mask(), order}; }
  bool bit(int lag_minus_one) const { return (code >> lag_minus_one) & 1u; }
  bool last_spike() const { return code & 1u; }
};

inline constexpr int kDefaultStateCap = 20;

// State of neuron i just before bin t, read from the raster (silent before 0).
std::uint32_t state_before(const SpikeRaster& raster, int i, int t, int order);

// Inhomogeneous chain over the K-bit state of one neuron on a window of bins.
//
// At bin t the appended bit n has prior probability spike_probability(t, s)
// given the previous state s, and the step carries two extra log factors:
// log_emission(t, s), the log-likelihood of other neurons' spikes at bin t
// (depends only on s), and n * tilt(t). Bins may be forced to a fixed value;
// forced bins have a single admissible successor.
class ConditionalChain {
 public:
  ConditionalChain(int order, Block window, std::uint32_t initial_state);

  int order() const { return order_; }
  std::uint32_t num_states() const { return 1u << order_; }
  std::uint32_t mask() const { return num_states() - 1u; }
  const Block& window() const { return window_; }
  int begin() const { return window_.begin; }
  int end() const { return window_.end; }
  int length() const { return window_.length(); }
  std::uint32_t initial_state() const { return initial_; }

  double spike_probability(int t, std::uint32_t prev) const { return spike_prob_[slot(t, prev)]; }
  double log_emission(int t, std::uint32_t prev) const {
    return log_emission_.empty() ? 0.0 : log_emission_[slot(t, prev)];
  }
  double tilt(int t) const { return tilt_[t - begin()]; }
  // -1 for free bins, otherwise the forced spike value.
  int forced(int t) const { return forced_[t - begin()]; }
  bool has_emission() const { return !log_emission_.empty(); }

  // Full log factor of appending `spike` at bin t from state prev (-inf when
  // inadmissible). Rows of the prior part sum to one.
  double log_factor(int t, std::uint32_t prev, bool spike) const;
  std::uint32_t successor(std::uint32_t prev, bool spike) const {
    return ((prev << 1) | (spike ? 1u : 0u)) & mask();
  }

  void set_spike_probability(int t, std::uint32_t prev, double p) { spike_prob_[slot(t, prev)] = p; }
  void set_log_emission(int t, std::uint32_t prev, double v);
  void add_tilt(int t, double v) { tilt_[t - begin()] += v; }
  void set_forced(int t, int value) { forced_[t - begin()] = static_cast<std::int8_t>(value); }

  // Free bins of the window (bins whose value is sampled).
  std::vector<int> free_bins() const;

 private:
  std::size_t slot(int t, std::uint32_t prev) const {
    return static_cast<std::size_t>(t - begin()) * num_states() + prev;
  }

  int order_;
  Block window_;
  std::uint32_t initial_;
  std::vector<double> spike_prob_;
  std::vector<double> log_emission_;
  std::vector<double> tilt_;
  std::vector<std::int8_t> forced_;
};

struct ChainOptions {
  // Number of lags kept in the state; 0 selects the neuron's full support.
  int state_lags = 0;
  int state_cap = kDefaultStateCap;
  // Keep self and outgoing kernels only up to state_lags, instead of
  // rejecting kernels that do not fit.
  bool truncate = false;
  // Include the likelihood of postsynaptic neurons' spikes as emissions.
  bool cross_terms = true;
};

// Conditional chain of neuron i given all other rows of the raster. The free
// bins are `block` (default: the whole raster); the window extends past the
// block's right edge by the state order, with those bins forced to their
// raster values so that every term touched by the block is included.
ConditionalChain build_conditional_chain(const NetworkModel& model, int i, const SpikeRaster& raster,
                                         std::optional<Block> block = std::nullopt,
                                         const ChainOptions& options = {});

// Normalized backward messages beta_t(s) = P(future factors | state s after t)
// up to a per-bin scale, stored in the linear domain.
class BackwardFilter {
 public:
  explicit BackwardFilter(const ConditionalChain& chain);

  const ConditionalChain& chain() const { return *chain_; }
  // log of the total mass of the chain from its initial state.
  double log_normalizer() const { return log_z_; }
  double beta(int t, std::uint32_t state) const;

  // P(n(t) = 1 | state prev before t, everything) under the chain.
  double spike_posterior(int t, std::uint32_t prev) const;

 private:
  const ConditionalChain* chain_;
  std::vector<double> beta_;
  std::vector<double> shift_;  // per-bin linear shift of the combined factors
  double log_z_ = 0.0;
};

struct SampledTrain {
  std::vector<std::uint8_t> train;  // over the chain's window
  double log_q = 0.0;
};

// Draw one train from the normalized chain by forward sampling against the
// backward messages, with its exact log-probability.
SampledTrain sample_chain(const BackwardFilter& filter, Rng& rng);

// Exact log-probability of `train` (over the chain window) under the chain.
double chain_log_probability(const BackwardFilter& filter, std::span<const std::uint8_t> train);

// M i.i.d. exact samples of the neuron's train over the chain window.
std::vector<std::vector<std::uint8_t>> forward_backward_sample(const ConditionalChain& chain, int samples,
                                                               std::uint64_t seed);

// Posterior spiking rate P(n(t) = 1 | everything) / Δ for every bin of the window.
std::vector<double> exact_marginals(const ConditionalChain& chain, double delta);

inline constexpr int kBruteForceMaxBins = 20;

// Enumerate all 2^T trains of neuron i (others fixed), weighting each by the
// full joint. T is the raster length and must not exceed kBruteForceMaxBins.
std::vector<double> brute_force_marginals(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          JointForm form = JointForm::bernoulli);
double brute_force_log_z(const NetworkModel& model, int i, const SpikeRaster& raster,
                         JointForm form = JointForm::bernoulli);
// Normalized posterior probabilities of all 2^T trains; train bit t = n(t).
std::vector<double> brute_force_posterior(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          JointForm form = JointForm::bernoulli);

}  // namespace spikesamp
