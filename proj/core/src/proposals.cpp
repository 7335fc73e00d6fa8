#include "spikesamp/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikesamp/errors.hpp"

namespace spikesamp {

std::string to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::homogeneous: return "homogeneous";
    case ProposalKind::delayed_input: return "delayed";
    case ProposalKind::weak_coupling: return "weak_coupling";
  }
  return "?";
}

ProposalKind proposal_kind_from_string(const std::string& name) {
  if (name == "homogeneous" || name == "uniform" || name == "poisson") return ProposalKind::homogeneous;
  if (name == "delayed" || name == "delayed_input") return ProposalKind::delayed_input;
  if (name == "weak_coupling" || name == "weak") return ProposalKind::weak_coupling;
  throw ConfigError("unknown proposal kind '" + name + "'");
}

std::vector<double> delayed_input(const NetworkModel& model, int i, const SpikeRaster& raster, Block block) {
  auto out = input_series(model, raster, i, block.begin, block.end, i, false);
  const auto w = model.self_kernel(i).weights();
  const int support = static_cast<int>(w.size());
  const auto row = raster.row(i);
  for (int s = std::max(0, block.begin - support); s < block.begin; ++s) {
    if (!row[s]) continue;
    for (int t = block.begin; t < block.end && t - s <= support; ++t) out[t - block.begin] += w[t - s - 1];
  }
  return out;
}

std::vector<double> future_correction(const NetworkModel& model, int i, const SpikeRaster& raster, int t0, int t1,
                                      int min_lag, bool with_prefactor, bool force_general) {
  std::vector<double> out(static_cast<std::size_t>(std::max(0, t1 - t0)), 0.0);
  const auto& f = model.nonlinearity();
  const bool general = force_general || !f.is_exponential();
  const double delta = model.delta();
  const int bins = raster.bins();
  std::vector<double> bracket;
  for (const auto& link : model.outgoing(i)) {
    const auto w = link.kernel->weights();
    const int support = static_cast<int>(w.size());
    if (support <= min_lag) continue;
    const int j = link.neuron;
    const auto row = raster.row(j);
    const int s0 = t0 + min_lag + 1;
    const int s1 = std::min(bins, t1 - 1 + support + 1);
    if (s0 >= s1) continue;
    bracket.assign(s1 - s0, 0.0);
    for (int s = s0; s < s1; ++s) {
      const double b = model.baseline(j, s);
      const double rate = f.rate(b);
      const double ratio = general ? f.derivative(b) / rate : 1.0;
      bracket[s - s0] = ratio * ((row[s] ? 1.0 : 0.0) - rate * delta);
    }
    for (int t = t0; t < t1; ++t) {
      double acc = 0.0;
      const int last = std::min(support, bins - 1 - t);
      for (int l = min_lag + 1; l <= last; ++l) acc += w[l - 1] * bracket[t + l - s0];
      out[t - t0] += acc;
    }
  }
  if (general && with_prefactor) {
    for (int t = t0; t < t1; ++t) {
      const double b = model.baseline(i, t);
      const double d = f.derivative(b);
      if (d == 0.0 || !std::isfinite(d)) throw NumericalError("degenerate weak-coupling prefactor: f'(b) = 0");
      out[t - t0] *= f.rate(b) / d;
    }
  }
  return out;
}

std::vector<double> weak_coupling_input(const NetworkModel& model, int i, const SpikeRaster& raster, Block block) {
  auto out = delayed_input(model, i, raster, block);
  const auto corr = future_correction(model, i, raster, block.begin, block.end);
  for (int t = block.begin; t < block.end; ++t) out[t - block.begin] += model.baseline(i, t) + corr[t - block.begin];
  return out;
}

IntensityContext::IntensityContext(const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                                   ProposalSpec spec)
    : model_(&model), neuron_(i), block_(block), spec_(spec) {
  if (block.begin < 0 || block.end > raster.bins() || block.length() < 1) throw std::invalid_argument("invalid block");
  switch (spec.kind) {
    case ProposalKind::homogeneous:
      if (!(spec.rate > 0.0)) throw std::invalid_argument("homogeneous proposal needs a positive rate");
      break;
    case ProposalKind::delayed_input:
      base_ = delayed_input(model, i, raster, block);
      for (int t = block.begin; t < block.end; ++t) base_[t - block.begin] += model.baseline(i, t);
      break;
    case ProposalKind::weak_coupling:
      base_ = weak_coupling_input(model, i, raster, block);
      break;
  }
}

template <typename Step>
void IntensityContext::run(Step&& step) const {
  const double delta = model_->delta();
  if (spec_.kind == ProposalKind::homogeneous) {
    const double p = std::min(spec_.rate * delta, kMaxSpikeProbability);
    const bool clamped = spec_.rate * delta > kMaxSpikeProbability;
    for (int t = block_.begin; t < block_.end; ++t) step(t, p, clamped);
    return;
  }
  const auto& f = model_->nonlinearity();
  const auto w = model_->self_kernel(neuron_).weights();
  const int support = static_cast<int>(w.size());
  // Self input scattered forward from proposed spikes, as a ring of pending terms.
  std::vector<double> pending(support + 1, 0.0);
  for (int t = block_.begin; t < block_.end; ++t) {
    double& slot = pending[t % (support + 1)];
    const double j = base(t) + slot;
    slot = 0.0;
    bool clamped = false;
    const double p = spike_probability(f, j, delta, &clamped);
    if (step(t, p, clamped)) {
      for (int l = 1; l <= support; ++l) pending[(t + l) % (support + 1)] += w[l - 1];
    }
  }
}

ProposalTrace IntensityContext::sample(Rng& rng) const {
  ProposalTrace out;
  out.train.resize(block_.length());
  run([&](int t, double p, bool clamped) {
    const bool spike = bernoulli(rng, p);
    out.train[t - block_.begin] = spike;
    out.log_q += spike ? std::log(p) : std::log1p(-p);
    out.clamped += clamped;
    return spike;
  });
  return out;
}

double IntensityContext::log_q(std::span<const std::uint8_t> train) const {
  if (static_cast<int>(train.size()) != block_.length()) throw std::invalid_argument("train length mismatch");
  double lq = 0.0;
  run([&](int t, double p, bool) {
    const bool spike = train[t - block_.begin] != 0;
    lq += spike ? std::log(p) : std::log1p(-p);
    return spike;
  });
  return lq;
}

ProposalTrace sample_proposal(const ProposalSpec& spec, const NetworkModel& model, int i, const SpikeRaster& raster,
                              Block block, std::uint64_t seed) {
  IntensityContext ctx(model, i, raster, block, spec);
  Rng rng(seed);
  return ctx.sample(rng);
}

double log_q_of(const ProposalSpec& spec, const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                std::span<const std::uint8_t> train) {
  return IntensityContext(model, i, raster, block, spec).log_q(train);
}

}  // namespace spikesamp
