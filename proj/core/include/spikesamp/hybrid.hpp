#pragma once

#include <memory>
#include <optional>
#include <string>

#include "spikesamp/exact_hmm.hpp"
#include "spikesamp/mh.hpp"

namespace spikesamp {

enum class HybridVariant {
  hybrid,          // truncated chain times tilt from discarded cross lags
  truncated_only,  // truncated chain, no tilt
  weak_cross,      // chain over self-history only; every cross term through the tilt
};

std::string to_string(HybridVariant v);
HybridVariant hybrid_variant_from_string(const std::string& name);

struct HybridConfig {
  double t_max = 0.010;  // seconds
  HybridVariant variant = HybridVariant::hybrid;
  // Also tilt with self-kernel lags beyond t_max, using raster bits past the block.
  bool tilt_self_tail = false;
  // Keep every lag (t_max ignored): the proposal is the exact conditional.
  bool exact = false;
  int state_cap = kDefaultStateCap;
};

// Number of lags kept by the truncated chain.
int truncation_lags(const HybridConfig& cfg, double delta);

// Exact chain with every kernel from and to the state neuron cut at k_trunc
// lags. With k_trunc at or above the neuron's support the exact chain is returned.
ConditionalChain build_truncated_chain(const NetworkModel& model, int i, const SpikeRaster& raster, int k_trunc,
                                       std::optional<Block> block = std::nullopt, bool cross_terms = true,
                                       int state_cap = kDefaultStateCap);

// Per-bin tilt exponent multiplying n_i(t) for bins [t0, t1):
//   sum_{j != i} sum_{l > min_lag} w_ji(l) (f'/f)(b_j(t+l)) [n_j(t+l) - f(b_j(t+l)) Δ].
// With `self_tail_from` >= 0 the self kernel's lags beyond min_lag are added
// for bins t+l >= self_tail_from.
std::vector<double> hybrid_tilt(const NetworkModel& model, int i, const SpikeRaster& raster, int t0, int t1,
                                int min_lag, int self_tail_from = -1);

// Proposal for one block: chain built from `cfg`, normalized by a backward pass.
class ChainProposal : public BlockProposal {
 public:
  ChainProposal(const NetworkModel& model, int i, const SpikeRaster& raster, Block block, const HybridConfig& cfg);

  ProposalTrace sample(Rng& rng) override;
  double log_q(std::span<const std::uint8_t> train) override;
  std::size_t memory_bytes() const override;

  const ConditionalChain& chain() const { return *chain_; }
  const BackwardFilter& filter() const { return *filter_; }

 private:
  Block block_;
  std::vector<std::uint8_t> forced_tail_;
  std::unique_ptr<ConditionalChain> chain_;
  std::unique_ptr<BackwardFilter> filter_;
};

class HybridProposalFactory : public ProposalFactory {
 public:
  explicit HybridProposalFactory(HybridConfig cfg) : cfg_(cfg) {}
  std::unique_ptr<BlockProposal> make(const NetworkModel& model, int i, const SpikeRaster& raster,
                                      Block block) const override;

 private:
  HybridConfig cfg_;
};

ProposalTrace hybrid_proposal_sample(const NetworkModel& model, int i, const SpikeRaster& raster,
                                     const HybridConfig& cfg, Block block, std::uint64_t seed);

BlockUpdate hybrid_mh_update(const NetworkModel& model, int i, SpikeRaster& raster, const HybridConfig& cfg,
                             Block block, std::uint64_t seed, JointForm form = JointForm::bernoulli);

}  // namespace spikesamp
