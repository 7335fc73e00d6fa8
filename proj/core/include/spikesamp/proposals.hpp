#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikesamp/network.hpp"
#include "spikesamp/random.hpp"

namespace spikesamp {

enum class ProposalKind { homogeneous, delayed_input, weak_coupling };

std::string to_string(ProposalKind kind);
ProposalKind proposal_kind_from_string(const std::string& name);

struct ProposalSpec {
  ProposalKind kind = ProposalKind::weak_coupling;
  // Rate (Hz) of the homogeneous proposal. Must be > 0 for that kind.
  double rate = 0.0;
};

struct ProposalTrace {
  std::vector<std::uint8_t> train;  // over the block
  double log_q = 0.0;
  long clamped = 0;                 // bins where the probability clamp was active
};

// J⁻_i(t) for t in the block: input from every other neuron plus self-history
// from bins before the block. Self-terms from bins inside the block are left
// out; the proposal adds them from its own draws. No baseline.
std::vector<double> delayed_input(const NetworkModel& model, int i, const SpikeRaster& raster, Block block);

// First-order correction from future spikes of postsynaptic neurons:
//   sum_{j != i} sum_{l > min_lag} pre_i(t) * (f'/f)(b_j(t+l)) * w_ji(l) * [n_j(t+l) - f(b_j(t+l)) Δ]
// with pre_i(t) = f(b_i(t)) / f'(b_i(t)) when `with_prefactor`, else 1.
// Bins t+l past the raster end contribute nothing. For the exponential link
// every prefactor equals one and the general path is skipped unless
// `force_general` is set.
std::vector<double> future_correction(const NetworkModel& model, int i, const SpikeRaster& raster, int t0, int t1,
                                      int min_lag = 0, bool with_prefactor = true, bool force_general = false);

// J̃_i(t) = b_i(t) + J⁻_i(t) + future_correction(...) over the block.
std::vector<double> weak_coupling_input(const NetworkModel& model, int i, const SpikeRaster& raster, Block block);

// Everything about a proposal that does not depend on the bits being
// proposed, computed once per (neuron, block) visit.
class IntensityContext {
 public:
  IntensityContext(const NetworkModel& model, int i, const SpikeRaster& raster, Block block, ProposalSpec spec);

  const Block& block() const { return block_; }
  const ProposalSpec& spec() const { return spec_; }
  // Input at bin t before self-history from inside the block.
  double base(int t) const { return base_[t - block_.begin]; }

  ProposalTrace sample(Rng& rng) const;
  double log_q(std::span<const std::uint8_t> train) const;

 private:
  template <typename Step>
  void run(Step&& step) const;

  const NetworkModel* model_;
  int neuron_;
  Block block_;
  ProposalSpec spec_;
  std::vector<double> base_;
};

ProposalTrace sample_proposal(const ProposalSpec& spec, const NetworkModel& model, int i, const SpikeRaster& raster,
                              Block block, std::uint64_t seed);

double log_q_of(const ProposalSpec& spec, const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                std::span<const std::uint8_t> train);

}  // namespace spikesamp
