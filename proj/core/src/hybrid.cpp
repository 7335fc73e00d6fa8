#include "spikesamp/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikesamp/errors.hpp"
#include "spikesamp/proposals.hpp"

namespace spikesamp {

std::string to_string(HybridVariant v) {
  switch (v) {
    case HybridVariant::hybrid: return "hybrid";
    case HybridVariant::truncated_only: return "truncated_only";
    case HybridVariant::weak_cross: return "weak_cross";
  }
  return "?";
}

HybridVariant hybrid_variant_from_string(const std::string& name) {
  if (name == "hybrid") return HybridVariant::hybrid;
  if (name == "truncated_only" || name == "truncated") return HybridVariant::truncated_only;
  if (name == "weak_cross") return HybridVariant::weak_cross;
  throw ConfigError("unknown hybrid variant '" + name + "'");
}

int truncation_lags(const HybridConfig& cfg, double delta) {
  if (!(cfg.t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  const int k = std::max(1, static_cast<int>(std::lround(cfg.t_max / delta)));
  if (k > cfg.state_cap) throw std::invalid_argument("t_max / delta exceeds the state-size cap");
  return k;
}

ConditionalChain build_truncated_chain(const NetworkModel& model, int i, const SpikeRaster& raster, int k_trunc,
                                       std::optional<Block> block, bool cross_terms, int state_cap) {
  ChainOptions opt;
  const int needed = cross_terms ? model.influence_lag(i) : model.self_kernel(i).support();
  opt.state_lags = std::max(1, std::min(k_trunc, needed));
  opt.truncate = true;
  opt.cross_terms = cross_terms;
  opt.state_cap = state_cap;
  return build_conditional_chain(model, i, raster, block, opt);
}

std::vector<double> hybrid_tilt(const NetworkModel& model, int i, const SpikeRaster& raster, int t0, int t1,
                                int min_lag, int self_tail_from) {
  auto out = future_correction(model, i, raster, t0, t1, min_lag, false);
  if (self_tail_from < 0) return out;
  const auto w = model.self_kernel(i).weights();
  const int support = static_cast<int>(w.size());
  const auto& f = model.nonlinearity();
  const auto row = raster.row(i);
  for (int t = t0; t < t1; ++t) {
    for (int l = min_lag + 1; l <= support && t + l < raster.bins(); ++l) {
      const int s = t + l;
      if (s < self_tail_from || w[l - 1] <= kHardInputThreshold) continue;
      const double b = model.baseline(i, s);
      const double rate = f.rate(b);
      out[t - t0] += w[l - 1] * f.derivative(b) / rate * ((row[s] ? 1.0 : 0.0) - rate * model.delta());
    }
  }
  return out;
}

ChainProposal::ChainProposal(const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                             const HybridConfig& cfg)
    : block_(block) {
  if (cfg.exact) {
    ChainOptions opt;
    opt.state_cap = cfg.state_cap;
    chain_ = std::make_unique<ConditionalChain>(build_conditional_chain(model, i, raster, block, opt));
  } else {
    const int k = truncation_lags(cfg, model.delta());
    const bool cross = cfg.variant != HybridVariant::weak_cross;
    chain_ = std::make_unique<ConditionalChain>(
        build_truncated_chain(model, i, raster, k, block, cross, cfg.state_cap));
    if (cfg.variant != HybridVariant::truncated_only) {
      const int min_lag = cross ? k : 0;
      const auto tilt = hybrid_tilt(model, i, raster, chain_->begin(), chain_->end(), min_lag,
                                    cfg.tilt_self_tail ? block.end : -1);
      for (int t = chain_->begin(); t < chain_->end(); ++t) chain_->add_tilt(t, tilt[t - chain_->begin()]);
    }
  }
  for (int t = block.end; t < chain_->end(); ++t) forced_tail_.push_back(raster.at(i, t));
  filter_ = std::make_unique<BackwardFilter>(*chain_);
  if (!std::isfinite(filter_->log_normalizer())) throw NumericalError("proposal chain has zero mass");
}

ProposalTrace ChainProposal::sample(Rng& rng) {
  auto s = sample_chain(*filter_, rng);
  s.train.resize(block_.length());
  return {std::move(s.train), s.log_q, 0};
}

double ChainProposal::log_q(std::span<const std::uint8_t> train) {
  std::vector<std::uint8_t> full(train.begin(), train.end());
  full.insert(full.end(), forced_tail_.begin(), forced_tail_.end());
  return chain_log_probability(*filter_, full);
}

std::size_t ChainProposal::memory_bytes() const {
  const std::size_t cells = static_cast<std::size_t>(chain_->length()) * chain_->num_states();
  return cells * sizeof(double) * (chain_->has_emission() ? 3 : 2);
}

std::unique_ptr<BlockProposal> HybridProposalFactory::make(const NetworkModel& model, int i,
                                                           const SpikeRaster& raster, Block block) const {
  return std::make_unique<ChainProposal>(model, i, raster, block, cfg_);
}

ProposalTrace hybrid_proposal_sample(const NetworkModel& model, int i, const SpikeRaster& raster,
                                     const HybridConfig& cfg, Block block, std::uint64_t seed) {
  ChainProposal p(model, i, raster, block, cfg);
  Rng rng(seed);
  return p.sample(rng);
}

BlockUpdate hybrid_mh_update(const NetworkModel& model, int i, SpikeRaster& raster, const HybridConfig& cfg,
                             Block block, std::uint64_t seed, JointForm form) {
  ChainProposal p(model, i, raster, block, cfg);
  Rng rng(seed);
  return mh_block_update(model, i, raster, block, p, rng, form);
}

}  // namespace spikesamp
