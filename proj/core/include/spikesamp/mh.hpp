#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "spikesamp/network.hpp"
#include "spikesamp/proposals.hpp"
#include "spikesamp/random.hpp"

namespace spikesamp {

// Proposal for one (neuron, block) visit. Independent of the block's current
// contents; may depend on everything outside the block.
class BlockProposal {
 public:
  virtual ~BlockProposal() = default;
  virtual ProposalTrace sample(Rng& rng) = 0;
  virtual double log_q(std::span<const std::uint8_t> train) = 0;
  // Rough resident size, used to bound the proposal cache.
  virtual std::size_t memory_bytes() const { return 0; }
};

class ProposalFactory {
 public:
  virtual ~ProposalFactory() = default;
  virtual std::unique_ptr<BlockProposal> make(const NetworkModel& model, int i, const SpikeRaster& raster,
                                              Block block) const = 0;
  // Bits of neuron i outside the block that the proposal depends on. Other
  // neurons are assumed fixed whenever proposals are cached.
  virtual std::vector<std::uint8_t> context_key(const NetworkModel& model, int i, const SpikeRaster& raster,
                                                Block block) const;
};

// Independence proposals built from an intensity recursion.
class IntensityProposalFactory : public ProposalFactory {
 public:
  explicit IntensityProposalFactory(ProposalSpec spec) : spec_(spec) {}
  std::unique_ptr<BlockProposal> make(const NetworkModel& model, int i, const SpikeRaster& raster,
                                      Block block) const override;

 private:
  ProposalSpec spec_;
};

// Extra observations of the hidden spike trains (e.g. fluorescence).
class SpikeObservation {
 public:
  virtual ~SpikeObservation() = default;
  virtual bool observes(int i) const = 0;
  // log P(obs_i | n_i) restricted to observations at bins [from, to).
  virtual double log_likelihood(int i, std::span<const std::uint8_t> row, int from, int to) const = 0;
  // Bins past a flipped bin whose observation terms are refreshed by the
  // pointwise Gibbs sampler.
  virtual int gibbs_window() const = 0;
};

struct BlockUpdate {
  bool accepted = false;
  double log_ratio = 0.0;
  long clamped = 0;
};

// Bins [block.begin, end) of postsynaptic inputs touched by changing n_i on the block.
Block affected_bins(const NetworkModel& model, int i, Block block, int bins);

// Log target restricted to the terms touched by resampling n_i on `block`.
double block_log_target(const NetworkModel& model, int i, const SpikeRaster& raster, Block block, JointForm form,
                        const SpikeObservation* obs = nullptr);

// One Metropolis-Hastings step on n_i over `block`; the raster is updated in place on acceptance.
BlockUpdate mh_block_update(const NetworkModel& model, int i, SpikeRaster& raster, Block block,
                            BlockProposal& proposal, Rng& rng, JointForm form = JointForm::bernoulli,
                            const SpikeObservation* obs = nullptr);

BlockUpdate mh_block_update(const NetworkModel& model, int i, SpikeRaster& raster, Block block,
                            const ProposalSpec& spec, std::uint64_t seed, JointForm form = JointForm::bernoulli);

// [0, bins) cut into consecutive blocks; block_length <= 0 gives one block.
std::vector<Block> partition_blocks(int bins, int block_length);

struct ChainStats {
  long proposals = 0;
  long accepted = 0;
  long clamped = 0;
  // Per bin: number of proposals covering the bin and accepted ones.
  std::vector<long> bin_proposals;
  std::vector<long> bin_accepted;
  double seconds = 0.0;

  double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / proposals : 0.0; }
  void record(Block block, const BlockUpdate& u);
};

struct ChainConfig {
  int block_length = 0;  // 0: whole train
  int burn_in = 1000;
  int samples = 5000;
  std::uint64_t seed = 1;
  JointForm form = JointForm::bernoulli;
  bool random_scan = false;
  // Overwrite each hidden train with one proposal draw before burn-in, so the
  // chain does not start from a state the proposal never visits.
  bool initialize_from_proposal = false;
  // Reuse proposals across sweeps while their context is unchanged. Only
  // effective with a single hidden neuron.
  bool cache_proposals = true;
  std::size_t cache_budget_bytes = std::size_t{1} << 29;
};

// Reuses proposals for a single hidden neuron.
class ProposalCache {
 public:
  explicit ProposalCache(std::size_t budget) : budget_(budget) {}
  BlockProposal& get(const ProposalFactory& factory, const NetworkModel& model, int i, const SpikeRaster& raster,
                     Block block);

 private:
  struct Entry {
    std::vector<std::uint8_t> key;
    std::unique_ptr<BlockProposal> proposal;
  };
  std::size_t budget_;
  std::size_t used_ = 0;
  std::map<std::pair<int, int>, Entry> entries_;
  std::unique_ptr<BlockProposal> scratch_;
};

// Visits each hidden neuron and applies blockwise MH updates left to right.
void block_gibbs_sweep(const NetworkModel& model, SpikeRaster& raster, std::span<const int> hidden,
                       const ChainConfig& cfg, const ProposalFactory& factory, Rng& rng, ChainStats& stats,
                       ProposalCache* cache = nullptr, const SpikeObservation* obs = nullptr);

// Single-site Gibbs: resample n_i(t) from its two-point conditional, bin by bin.
void pointwise_gibbs_sweep(const NetworkModel& model, SpikeRaster& raster, std::span<const int> hidden, Rng& rng,
                           JointForm form = JointForm::bernoulli, const SpikeObservation* obs = nullptr);

// Log odds log P(n_i(t)=1 | rest) - log P(n_i(t)=0 | rest) by direct evaluation.
double pointwise_log_odds(const NetworkModel& model, const SpikeRaster& raster, int i, int t,
                          JointForm form = JointForm::bernoulli);

// Hidden rows of every recorded sweep.
struct ChainSamples {
  std::vector<int> hidden;
  int bins = 0;
  std::vector<std::vector<std::uint8_t>> rows;  // rows[m] holds hidden.size() * bins bits

  std::size_t size() const { return rows.size(); }
  std::span<const std::uint8_t> train(std::size_t m, std::size_t h) const {
    return std::span<const std::uint8_t>(rows[m]).subspan(h * bins, bins);
  }
  // All recorded trains of hidden neuron index h.
  std::vector<std::vector<std::uint8_t>> trains(std::size_t h) const;
};

struct ChainResult {
  ChainSamples samples;
  ChainStats stats;
  SpikeRaster final_state;
};

// Called after each recorded sweep with (sample index, current raster).
using SampleSink = std::function<void(int, const SpikeRaster&)>;

// Runs burn_in + samples sweeps. A null factory selects pointwise Gibbs.
ChainResult run_chain(const NetworkModel& model, const SpikeRaster& initial, std::span<const int> hidden,
                      const ChainConfig& cfg, const ProposalFactory* factory, const SpikeObservation* obs = nullptr,
                      const SampleSink& sink = {}, bool keep_samples = true);

}  // namespace spikesamp
