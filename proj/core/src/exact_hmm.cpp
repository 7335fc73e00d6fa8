#include "spikesamp/exact_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spikesamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// table[s] = sum_l w(l) * bit_{l-1}(s) over the first `order` lags.
std::vector<double> lag_table(const CouplingKernel& kernel, int order) {
  const std::uint32_t states = 1u << order;
  std::vector<double> table(states, 0.0);
  for (std::uint32_t s = 1; s < states; ++s) {
    // Peel off the highest set bit so each entry costs O(1).
    int top = 31 - __builtin_clz(s);
    table[s] = table[s & ~(1u << top)] + kernel.at(top + 1);
  }
  return table;
}

}  // namespace

std::uint32_t state_before(const SpikeRaster& raster, int i, int t, int order) {
  std::uint32_t s = 0;
  for (int l = 1; l <= order; ++l) {
    if (raster.at_or_silent(i, t - l)) s |= 1u << (l - 1);
  }
  return s;
}

ConditionalChain::ConditionalChain(int order, Block window, std::uint32_t initial_state)
    : order_(order), window_(window), initial_(initial_state) {
  if (order < 1 || order > 30) throw std::invalid_argument("state order must lie in [1, 30]");
  if (window.length() < 1) throw std::invalid_argument("chain window must be non-empty");
  const auto cells = static_cast<std::size_t>(window.length()) * num_states();
  spike_prob_.assign(cells, 0.0);
  tilt_.assign(window.length(), 0.0);
  forced_.assign(window.length(), -1);
  initial_ &= mask();
}

void ConditionalChain::set_log_emission(int t, std::uint32_t prev, double v) {
  if (log_emission_.empty()) log_emission_.assign(spike_prob_.size(), 0.0);
  log_emission_[slot(t, prev)] = v;
}

double ConditionalChain::log_factor(int t, std::uint32_t prev, bool spike) const {
  const int f = forced(t);
  if (f >= 0 && f != static_cast<int>(spike)) return kNegInf;
  const double p = spike_probability(t, prev);
  const double prior = spike ? std::log(p) : std::log1p(-p);
  return prior + log_emission(t, prev) + (spike ? tilt(t) : 0.0);
}

std::vector<int> ConditionalChain::free_bins() const {
  std::vector<int> out;
  for (int t = begin(); t < end(); ++t) {
    if (forced(t) < 0) out.push_back(t);
  }
  return out;
}

ConditionalChain build_conditional_chain(const NetworkModel& model, int i, const SpikeRaster& raster,
                                         std::optional<Block> block, const ChainOptions& options) {
  if (i < 0 || i >= model.neurons()) throw std::out_of_range("neuron index");
  const int bins = raster.bins();
  const Block free = block.value_or(Block{0, bins});
  if (free.begin < 0 || free.end > bins || free.length() < 1) throw std::invalid_argument("invalid block");

  const int needed = options.cross_terms ? model.influence_lag(i) : model.self_kernel(i).support();
  const int order = options.state_lags > 0 ? options.state_lags : std::max(1, needed);
  if (order > options.state_cap) {
    throw std::invalid_argument("state space of 2^" + std::to_string(order) + " states exceeds the cap of 2^" +
                                std::to_string(options.state_cap) +
                                "; memory and time grow as T * 2^K");
  }
  if (!options.truncate && needed > order) {
    throw std::invalid_argument("kernel support of " + std::to_string(needed) + " bins exceeds K = " +
                                std::to_string(order));
  }

  const Block window{free.begin, std::min(bins, free.end + order)};
  ConditionalChain chain(order, window, state_before(raster, i, free.begin, order));
  for (int t = free.end; t < window.end; ++t) chain.set_forced(t, raster.at(i, t));

  const auto& f = model.nonlinearity();
  const double delta = model.delta();
  const std::uint32_t states = chain.num_states();

  const auto self = lag_table(model.self_kernel(i).truncated(order), order);
  const auto drive = input_series(model, raster, i, window.begin, window.end, i);
  for (int t = window.begin; t < window.end; ++t) {
    const double a = drive[t - window.begin];
    for (std::uint32_t s = 0; s < states; ++s) chain.set_spike_probability(t, s, spike_probability(f, a + self[s], delta));
  }

  if (options.cross_terms && !model.outgoing(i).empty()) {
    std::vector<double> emission(static_cast<std::size_t>(window.length()) * states, 0.0);
    for (const auto& link : model.outgoing(i)) {
      const int j = link.neuron;
      const auto table = lag_table(link.kernel->truncated(order), order);
      const auto other = input_series(model, raster, j, window.begin, window.end, i);
      const auto row = raster.row(j);
      for (int t = window.begin; t < window.end; ++t) {
        const bool spike = row[t] != 0;
        const double a = other[t - window.begin];
        double* e = emission.data() + static_cast<std::size_t>(t - window.begin) * states;
        for (std::uint32_t s = 0; s < states; ++s) e[s] += spike_log_mass(f, a + table[s], delta, spike);
      }
    }
    for (int t = window.begin; t < window.end; ++t) {
      const double* e = emission.data() + static_cast<std::size_t>(t - window.begin) * states;
      for (std::uint32_t s = 0; s < states; ++s) chain.set_log_emission(t, s, e[s]);
    }
  }
  return chain;
}

BackwardFilter::BackwardFilter(const ConditionalChain& chain) : chain_(&chain) {
  const int len = chain.length();
  const std::uint32_t states = chain.num_states();
  beta_.assign(static_cast<std::size_t>(len) * states, 0.0);
  shift_.assign(len, 0.0);
  std::fill(beta_.end() - states, beta_.end(), 1.0);

  std::vector<double> raw(states);
  double log_scale = 0.0;  // log of the dropped scale of beta_{t}
  for (int t = chain.end() - 1; t >= chain.begin(); --t) {
    const int k = t - chain.begin();
    double shift = 0.0;
    if (chain.has_emission()) {
      shift = kNegInf;
      for (std::uint32_t s = 0; s < states; ++s) shift = std::max(shift, chain.log_emission(t, s));
      if (!std::isfinite(shift)) shift = 0.0;
    }
    shift_[k] = shift;
    const double* next = beta_.data() + static_cast<std::size_t>(k) * states;
    const int forced = chain.forced(t);
    const double tilt = std::exp(chain.tilt(t));
    const auto raw_at = [&](std::uint32_t s) {
      const double p = chain.spike_probability(t, s);
      double v = 0.0;
      if (forced != 1) v += (1.0 - p) * next[chain.successor(s, false)];
      if (forced != 0) v += p * tilt * next[chain.successor(s, true)];
      return chain.has_emission() ? v * std::exp(chain.log_emission(t, s) - shift) : v;
    };
    if (k == 0) {
      const double v = raw_at(chain.initial_state());
      log_z_ = v > 0.0 ? std::log(v) + shift + log_scale : kNegInf;
      break;
    }
    double top = 0.0;
    for (std::uint32_t s = 0; s < states; ++s) {
      raw[s] = raw_at(s);
      top = std::max(top, raw[s]);
    }
    double* prev = beta_.data() + static_cast<std::size_t>(k - 1) * states;
    if (top > 0.0) {
      for (std::uint32_t s = 0; s < states; ++s) prev[s] = raw[s] / top;
      log_scale += shift + std::log(top);
    } else {
      log_scale = kNegInf;
    }
  }
}

double BackwardFilter::beta(int t, std::uint32_t state) const {
  return beta_[static_cast<std::size_t>(t - chain_->begin()) * chain_->num_states() + state];
}

double BackwardFilter::spike_posterior(int t, std::uint32_t prev) const {
  const auto& c = *chain_;
  const int forced = c.forced(t);
  if (forced >= 0) return forced;
  const double p = c.spike_probability(t, prev);
  const double w1 = p * std::exp(c.tilt(t)) * beta(t, c.successor(prev, true));
  const double w0 = (1.0 - p) * beta(t, c.successor(prev, false));
  const double z = w0 + w1;
  return z > 0.0 ? w1 / z : 0.0;
}

SampledTrain sample_chain(const BackwardFilter& filter, Rng& rng) {
  const auto& c = filter.chain();
  SampledTrain out;
  out.train.resize(c.length());
  std::uint32_t s = c.initial_state();
  for (int t = c.begin(); t < c.end(); ++t) {
    const double p1 = filter.spike_posterior(t, s);
    const bool spike = bernoulli(rng, p1);
    out.log_q += spike ? std::log(p1) : std::log1p(-p1);
    out.train[t - c.begin()] = spike;
    s = c.successor(s, spike);
  }
  return out;
}

double chain_log_probability(const BackwardFilter& filter, std::span<const std::uint8_t> train) {
  const auto& c = filter.chain();
  if (static_cast<int>(train.size()) != c.length()) throw std::invalid_argument("train length mismatch");
  double lp = 0.0;
  std::uint32_t s = c.initial_state();
  for (int t = c.begin(); t < c.end(); ++t) {
    const bool spike = train[t - c.begin()] != 0;
    const double p1 = filter.spike_posterior(t, s);
    lp += spike ? std::log(p1) : std::log1p(-p1);
    if (lp == kNegInf) return lp;
    s = c.successor(s, spike);
  }
  return lp;
}

std::vector<std::vector<std::uint8_t>> forward_backward_sample(const ConditionalChain& chain, int samples,
                                                               std::uint64_t seed) {
  const BackwardFilter filter(chain);
  if (filter.log_normalizer() == kNegInf) throw std::invalid_argument("chain admits no spike train");
  Rng rng(seed);
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(samples);
  for (int m = 0; m < samples; ++m) out.push_back(sample_chain(filter, rng).train);
  return out;
}

std::vector<double> exact_marginals(const ConditionalChain& chain, double delta) {
  const BackwardFilter filter(chain);
  const std::uint32_t states = chain.num_states();
  std::vector<double> alpha(states, 0.0), next(states);
  alpha[chain.initial_state()] = 1.0;
  std::vector<double> rate(chain.length(), 0.0);
  for (int t = chain.begin(); t < chain.end(); ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    const int forced = chain.forced(t);
    const double tilt = std::exp(chain.tilt(t));
    double shift = kNegInf;
    if (chain.has_emission()) {
      for (std::uint32_t s = 0; s < states; ++s) {
        if (alpha[s] > 0.0) shift = std::max(shift, chain.log_emission(t, s));
      }
    }
    for (std::uint32_t s = 0; s < states; ++s) {
      if (alpha[s] == 0.0) continue;
      double a = alpha[s];
      if (chain.has_emission()) a *= std::exp(chain.log_emission(t, s) - shift);
      const double p = chain.spike_probability(t, s);
      if (forced != 1) next[chain.successor(s, false)] += a * (1.0 - p);
      if (forced != 0) next[chain.successor(s, true)] += a * p * tilt;
    }
    double total = 0.0, spiking = 0.0, top = 0.0;
    for (std::uint32_t s = 0; s < states; ++s) {
      top = std::max(top, next[s]);
      const double w = next[s] * filter.beta(t, s);
      total += w;
      if (s & 1u) spiking += w;
    }
    if (top > 0.0) {
      for (auto& v : next) v /= top;
    }
    alpha.swap(next);
    rate[t - chain.begin()] = total > 0.0 ? spiking / total / delta : 0.0;
  }
  return rate;
}

namespace {

std::vector<double> enumerate_log_weights(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          JointForm form) {
  const int bins = raster.bins();
  if (bins > kBruteForceMaxBins) {
    throw std::invalid_argument("brute-force enumeration limited to T <= " + std::to_string(kBruteForceMaxBins));
  }
  SpikeRaster work = raster;
  const std::uint32_t trains = 1u << bins;
  std::vector<double> logw(trains);
  for (std::uint32_t m = 0; m < trains; ++m) {
    for (int t = 0; t < bins; ++t) work.set(i, t, (m >> t) & 1u);
    logw[m] = log_joint(model, work, form);
  }
  return logw;
}

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (top == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

}  // namespace

std::vector<double> brute_force_posterior(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          JointForm form) {
  auto logw = enumerate_log_weights(model, i, raster, form);
  const double z = log_sum_exp(logw);
  if (z == kNegInf) throw std::invalid_argument("no admissible spike train");
  for (auto& x : logw) x = std::exp(x - z);
  return logw;
}

std::vector<double> brute_force_marginals(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          JointForm form) {
  const auto post = brute_force_posterior(model, i, raster, form);
  const int bins = raster.bins();
  std::vector<double> rate(bins, 0.0);
  for (std::uint32_t m = 0; m < post.size(); ++m) {
    for (int t = 0; t < bins; ++t) {
      if ((m >> t) & 1u) rate[t] += post[m];
    }
  }
  for (auto& r : rate) r /= model.delta();
  return rate;
}

double brute_force_log_z(const NetworkModel& model, int i, const SpikeRaster& raster, JointForm form) {
  return log_sum_exp(enumerate_log_weights(model, i, raster, form));
}

}  // namespace spikesamp
