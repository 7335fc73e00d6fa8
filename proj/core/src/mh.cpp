#include "spikesamp/mh.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace spikesamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class IntensityProposal : public BlockProposal {
 public:
  IntensityProposal(const NetworkModel& model, int i, const SpikeRaster& raster, Block block, ProposalSpec spec)
      : ctx_(model, i, raster, block, spec) {}
  ProposalTrace sample(Rng& rng) override { return ctx_.sample(rng); }
  double log_q(std::span<const std::uint8_t> train) override { return ctx_.log_q(train); }
  std::size_t memory_bytes() const override { return sizeof(double) * ctx_.block().length(); }

 private:
  IntensityContext ctx_;
};

double log_odds(double lp1, double lp0) {
  if (lp1 == kNegInf && lp0 == kNegInf) return std::numeric_limits<double>::quiet_NaN();
  return lp1 - lp0;
}

}  // namespace

std::vector<std::uint8_t> ProposalFactory::context_key(const NetworkModel& model, int i, const SpikeRaster& raster,
                                                       Block block) const {
  const int lags = model.max_lag();
  std::vector<std::uint8_t> key;
  key.reserve(2 * lags);
  for (int t = block.begin - lags; t < block.begin; ++t) key.push_back(raster.at_or_silent(i, t));
  for (int t = block.end; t < std::min(raster.bins(), block.end + lags); ++t) key.push_back(raster.at(i, t));
  return key;
}

std::unique_ptr<BlockProposal> IntensityProposalFactory::make(const NetworkModel& model, int i,
                                                              const SpikeRaster& raster, Block block) const {
  return std::make_unique<IntensityProposal>(model, i, raster, block, spec_);
}

Block affected_bins(const NetworkModel& model, int i, Block block, int bins) {
  return {block.begin, std::min(bins, block.end + model.influence_lag(i))};
}

double block_log_target(const NetworkModel& model, int i, const SpikeRaster& raster, Block block, JointForm form,
                        const SpikeObservation* obs) {
  std::vector<int> neurons{i};
  for (const auto& link : model.outgoing(i)) neurons.push_back(link.neuron);
  const Block span = affected_bins(model, i, block, raster.bins());
  double lp = log_joint_terms(model, raster, neurons, span.begin, span.end, form);
  if (obs && obs->observes(i) && lp != kNegInf) lp += obs->log_likelihood(i, raster.row(i), block.begin, raster.bins());
  return lp;
}

BlockUpdate mh_block_update(const NetworkModel& model, int i, SpikeRaster& raster, Block block,
                            BlockProposal& proposal, Rng& rng, JointForm form, const SpikeObservation* obs) {
  BlockUpdate out;
  auto candidate = proposal.sample(rng);
  out.clamped = candidate.clamped;
  auto row = raster.row(i);
  const auto current = row.subspan(block.begin, block.length());
  if (std::equal(current.begin(), current.end(), candidate.train.begin())) {
    out.accepted = true;
    return out;
  }
  const std::vector<std::uint8_t> old(current.begin(), current.end());
  const double lq_old = proposal.log_q(old);
  const double lp_old = block_log_target(model, i, raster, block, form, obs);
  std::copy(candidate.train.begin(), candidate.train.end(), current.begin());
  const double lp_new = block_log_target(model, i, raster, block, form, obs);

  if (lp_new == kNegInf) {
    out.log_ratio = kNegInf;
  } else if (lp_old == kNegInf) {
    out.log_ratio = std::numeric_limits<double>::infinity();
  } else {
    out.log_ratio = (lp_new - lp_old) + (lq_old - candidate.log_q);
  }
  out.accepted = out.log_ratio >= 0.0 || uniform01(rng) < std::exp(out.log_ratio);
  if (!out.accepted) std::copy(old.begin(), old.end(), current.begin());
  return out;
}

BlockUpdate mh_block_update(const NetworkModel& model, int i, SpikeRaster& raster, Block block,
                            const ProposalSpec& spec, std::uint64_t seed, JointForm form) {
  IntensityProposal proposal(model, i, raster, block, spec);
  Rng rng(seed);
  return mh_block_update(model, i, raster, block, proposal, rng, form);
}

std::vector<Block> partition_blocks(int bins, int block_length) {
  if (bins < 1) throw std::invalid_argument("no bins to partition");
  if (block_length <= 0 || block_length >= bins) return {Block{0, bins}};
  std::vector<Block> out;
  for (int a = 0; a < bins; a += block_length) out.push_back({a, std::min(bins, a + block_length)});
  return out;
}

void ChainStats::record(Block block, const BlockUpdate& u) {
  ++proposals;
  accepted += u.accepted;
  clamped += u.clamped;
  if (static_cast<int>(bin_proposals.size()) < block.end) {
    bin_proposals.resize(block.end, 0);
    bin_accepted.resize(block.end, 0);
  }
  for (int t = block.begin; t < block.end; ++t) {
    ++bin_proposals[t];
    bin_accepted[t] += u.accepted;
  }
}

BlockProposal& ProposalCache::get(const ProposalFactory& factory, const NetworkModel& model, int i,
                                  const SpikeRaster& raster, Block block) {
  auto key = factory.context_key(model, i, raster, block);
  auto it = entries_.find({i, block.begin});
  if (it != entries_.end() && it->second.key == key) return *it->second.proposal;
  auto made = factory.make(model, i, raster, block);
  const std::size_t bytes = made->memory_bytes();
  if (it != entries_.end()) {
    used_ -= it->second.proposal->memory_bytes();
    entries_.erase(it);
  }
  if (used_ + bytes > budget_) {
    scratch_ = std::move(made);
    return *scratch_;
  }
  used_ += bytes;
  auto& e = entries_[{i, block.begin}];
  e.key = std::move(key);
  e.proposal = std::move(made);
  return *e.proposal;
}

void block_gibbs_sweep(const NetworkModel& model, SpikeRaster& raster, std::span<const int> hidden,
                       const ChainConfig& cfg, const ProposalFactory& factory, Rng& rng, ChainStats& stats,
                       ProposalCache* cache, const SpikeObservation* obs) {
  std::vector<int> order(hidden.begin(), hidden.end());
  if (cfg.random_scan) std::shuffle(order.begin(), order.end(), rng);
  const auto blocks = partition_blocks(raster.bins(), cfg.block_length);
  for (int i : order) {
    for (const auto& block : blocks) {
      std::unique_ptr<BlockProposal> owned;
      BlockProposal* proposal = nullptr;
      if (cache) {
        proposal = &cache->get(factory, model, i, raster, block);
      } else {
        owned = factory.make(model, i, raster, block);
        proposal = owned.get();
      }
      stats.record(block, mh_block_update(model, i, raster, block, *proposal, rng, cfg.form, obs));
    }
  }
}

double pointwise_log_odds(const NetworkModel& model, const SpikeRaster& raster, int i, int t, JointForm form) {
  SpikeRaster work = raster;
  std::vector<int> neurons{i};
  for (const auto& link : model.outgoing(i)) neurons.push_back(link.neuron);
  const int end = std::min(raster.bins(), t + 1 + model.influence_lag(i));
  work.set(i, t, true);
  const double lp1 = log_joint_terms(model, work, neurons, t, end, form);
  work.set(i, t, false);
  const double lp0 = log_joint_terms(model, work, neurons, t, end, form);
  return log_odds(lp1, lp0);
}

void pointwise_gibbs_sweep(const NetworkModel& model, SpikeRaster& raster, std::span<const int> hidden, Rng& rng,
                           JointForm form, const SpikeObservation* obs) {
  const int bins = raster.bins();
  const double delta = model.delta();
  const auto& f = model.nonlinearity();
  struct Target {
    int neuron;
    const CouplingKernel* kernel;
    std::vector<double> input;
  };
  for (int i : hidden) {
    std::vector<Target> targets;
    targets.push_back({i, &model.self_kernel(i), input_series(model, raster, i, 0, bins)});
    for (const auto& link : model.outgoing(i)) {
      targets.push_back({link.neuron, link.kernel, input_series(model, raster, link.neuron, 0, bins)});
    }
    const bool observed = obs && obs->observes(i);
    auto row = raster.row(i);
    for (int t = 0; t < bins; ++t) {
      const bool cur = row[t] != 0;
      const double own = targets[0].input[t];
      double lp1 = spike_log_mass(f, own, delta, true, form);
      double lp0 = spike_log_mass(f, own, delta, false, form);
      for (const auto& x : targets) {
        const auto w = x.kernel->weights();
        const auto xrow = raster.row(x.neuron);
        const int last = std::min(static_cast<int>(w.size()), bins - 1 - t);
        for (int l = 1; l <= last; ++l) {
          const double j = x.input[t + l];
          const double j1 = cur ? j : j + w[l - 1];
          const double j0 = cur ? j - w[l - 1] : j;
          const bool spike = xrow[t + l] != 0;
          lp1 += spike_log_mass(f, j1, delta, spike, form);
          lp0 += spike_log_mass(f, j0, delta, spike, form);
        }
      }
      if (observed) {
        const int to = std::min(bins, t + 1 + obs->gibbs_window());
        row[t] = 1;
        lp1 += obs->log_likelihood(i, row, t, to);
        row[t] = 0;
        lp0 += obs->log_likelihood(i, row, t, to);
        row[t] = cur;
      }
      const double odds = log_odds(lp1, lp0);
      if (std::isnan(odds)) continue;
      const double p1 = odds >= 0.0 ? 1.0 / (1.0 + std::exp(-odds)) : std::exp(odds) / (1.0 + std::exp(odds));
      const bool next = bernoulli(rng, p1);
      if (next == cur) continue;
      row[t] = next;
      const double sign = next ? 1.0 : -1.0;
      for (auto& x : targets) {
        const auto w = x.kernel->weights();
        const int last = std::min(static_cast<int>(w.size()), bins - 1 - t);
        for (int l = 1; l <= last; ++l) x.input[t + l] += sign * w[l - 1];
      }
    }
  }
}

std::vector<std::vector<std::uint8_t>> ChainSamples::trains(std::size_t h) const {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(rows.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto s = train(m, h);
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

ChainResult run_chain(const NetworkModel& model, const SpikeRaster& initial, std::span<const int> hidden,
                      const ChainConfig& cfg, const ProposalFactory* factory, const SpikeObservation* obs,
                      const SampleSink& sink, bool keep_samples) {
  if (hidden.empty()) throw std::invalid_argument("hidden set must be non-empty");
  if (cfg.samples < 1 || cfg.burn_in < 0) throw std::invalid_argument("need samples >= 1 and burn_in >= 0");
  for (int i : hidden) {
    if (i < 0 || i >= model.neurons()) throw std::out_of_range("hidden neuron index");
  }
  ChainResult result{{std::vector<int>(hidden.begin(), hidden.end()), initial.bins(), {}}, {}, initial};
  SpikeRaster& raster = result.final_state;
  Rng rng(cfg.seed);
  std::unique_ptr<ProposalCache> cache;
  if (factory && cfg.cache_proposals && hidden.size() == 1) cache = std::make_unique<ProposalCache>(cfg.cache_budget_bytes);
  ChainStats burn;
  const auto start = std::chrono::steady_clock::now();
  if (keep_samples) result.samples.rows.reserve(cfg.samples);
  if (factory && cfg.initialize_from_proposal) {
    for (int i : hidden) {
      for (const auto& block : partition_blocks(raster.bins(), cfg.block_length)) {
        const auto draw = factory->make(model, i, raster, block)->sample(rng);
        auto row = raster.row(i);
        std::copy(draw.train.begin(), draw.train.end(), row.begin() + block.begin);
      }
    }
  }
  for (int sweep = 0; sweep < cfg.burn_in + cfg.samples; ++sweep) {
    const bool recording = sweep >= cfg.burn_in;
    if (factory) {
      block_gibbs_sweep(model, raster, hidden, cfg, *factory, rng, recording ? result.stats : burn, cache.get(), obs);
    } else {
      pointwise_gibbs_sweep(model, raster, hidden, rng, cfg.form, obs);
    }
    if (!recording) continue;
    if (keep_samples) {
      std::vector<std::uint8_t> rows;
      rows.reserve(hidden.size() * raster.bins());
      for (int i : hidden) {
        const auto r = raster.row(i);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      result.samples.rows.push_back(std::move(rows));
    }
    if (sink) sink(sweep - cfg.burn_in, raster);
  }
  result.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace spikesamp
