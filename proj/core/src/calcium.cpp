#include "spikesamp/calcium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "spikesamp/errors.hpp"

namespace spikesamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double step_calcium(const CalciumModel& cal, double c, double a, bool spike) {
  return c - a * (c - cal.baseline) + (spike ? cal.amplitude : 0.0);
}

}  // namespace

double CalciumModel::saturate(double c) const {
  return saturation == Saturation::linear ? gain * c + offset : c / (c + kd);
}

double CalciumModel::saturate_slope(double c) const {
  if (saturation == Saturation::linear) return gain;
  const double d = c + kd;
  return kd / (d * d);
}

double CalciumModel::variance(double c) const { return noise_slope * saturate(c) + noise_floor; }

int CalciumModel::frame_spacing(double delta) const {
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
  return std::max(1, static_cast<int>(std::lround(1.0 / (frame_rate * delta))));
}

void CalciumModel::validate(double delta) const {
  if (!(tau > delta)) throw ConfigError("calcium time constant must exceed the bin width");
  if (!(amplitude > 0.0)) throw ConfigError("calcium jump amplitude must be positive");
  if (baseline < 0.0) throw ConfigError("baseline calcium must be non-negative");
  if (saturation == Saturation::hill && !(kd > 0.0)) throw ConfigError("Hill K_d must be positive");
  if (saturation == Saturation::linear && gain == 0.0) throw ConfigError("linear gain must be non-zero");
  if (noise_slope < 0.0 || noise_floor < 0.0) throw ConfigError("noise parameters must be non-negative");
  if (!(variance(baseline) > 0.0)) throw ConfigError("fluorescence variance must be positive");
  if (frame_rate * delta > 1.0 + 1e-9) throw ConfigError("frame rate must not exceed 1 / delta");
  (void)frame_spacing(delta);
}

CalciumModel CalciumModel::with_noise_scale(double factor) const {
  CalciumModel out = *this;
  out.noise_slope *= factor * factor;
  out.noise_floor *= factor * factor;
  return out;
}

std::vector<int> frame_bins(int bins, int spacing) {
  std::vector<int> out;
  for (int t = spacing - 1; t < bins; t += spacing) out.push_back(t);
  return out;
}

std::vector<double> calcium_path(const CalciumModel& cal, std::span<const std::uint8_t> train, double delta) {
  const double a = cal.decay(delta);
  std::vector<double> c(train.size());
  double cur = cal.baseline;
  for (std::size_t t = 0; t < train.size(); ++t) {
    cur = step_calcium(cal, cur, a, train[t] != 0);
    c[t] = cur;
  }
  return c;
}

CalciumSimulation simulate_calcium(std::span<const std::uint8_t> train, const CalciumModel& cal, double delta,
                                   std::uint64_t seed) {
  cal.validate(delta);
  CalciumSimulation out;
  out.calcium = calcium_path(cal, train, delta);
  Rng rng(seed);
  std::normal_distribution<double> noise;
  for (int t : frame_bins(static_cast<int>(train.size()), cal.frame_spacing(delta))) {
    const double c = out.calcium[t];
    out.trace.bins.push_back(t);
    out.trace.values.push_back(cal.saturate(c) + std::sqrt(cal.variance(c)) * noise(rng));
  }
  return out;
}

double fluorescence_log_likelihood(const CalciumModel& cal, const FluorescenceTrace& trace,
                                   std::span<const std::uint8_t> train, double delta, int from, int to) {
  const int bins = static_cast<int>(train.size());
  if (to < 0 || to > bins) to = bins;
  const double a = cal.decay(delta);
  double c = cal.baseline;
  double ll = 0.0;
  std::size_t k = std::lower_bound(trace.bins.begin(), trace.bins.end(), 0) - trace.bins.begin();
  for (int t = 0; t < to; ++t) {
    c = step_calcium(cal, c, a, train[t] != 0);
    while (k < trace.size() && trace.bins[k] < t) ++k;
    if (k < trace.size() && trace.bins[k] == t && t >= from) {
      ll += log_normal(trace.values[k], cal.saturate(c), cal.variance(c));
    }
  }
  return ll;
}

EffectiveSnr effective_snr(const CalciumModel& cal, double rate, double delta, int bins, std::uint64_t seed) {
  cal.validate(delta);
  if (bins < 2) throw std::invalid_argument("eSNR needs at least two bins");
  Rng rng(seed);
  std::vector<std::uint8_t> train(bins);
  for (auto& n : train) n = bernoulli(rng, rate * delta);
  const auto c = calcium_path(cal, train, delta);
  std::normal_distribution<double> noise;
  std::vector<double> f(bins);
  for (int t = 0; t < bins; ++t) f[t] = cal.saturate(c[t]) + std::sqrt(cal.variance(c[t])) * noise(rng);

  const auto ratio = [](double jump_sum, long jumps, double quiet_sq, long quiet) {
    if (jumps == 0 || quiet == 0) throw NumericalError("eSNR estimate has no spiking or no quiet increments");
    const double denom = std::sqrt(quiet_sq / quiet / 2.0);
    if (!(denom > 0.0)) throw NumericalError("eSNR denominator vanishes (zero noise)");
    return jump_sum / jumps / denom;
  };

  EffectiveSnr out;
  {
    double js = 0.0, qs = 0.0;
    long jn = 0, qn = 0;
    for (int t = 1; t < bins; ++t) {
      const double d = f[t] - f[t - 1];
      if (train[t]) {
        js += d;
        ++jn;
      } else {
        qs += d * d;
        ++qn;
      }
    }
    out.per_bin = ratio(js, jn, qs, qn);
  }
  {
    const auto frames = frame_bins(bins, cal.frame_spacing(delta));
    double js = 0.0, qs = 0.0;
    long jn = 0, qn = 0;
    for (std::size_t k = 1; k < frames.size(); ++k) {
      bool spiked = false;
      for (int t = frames[k - 1] + 1; t <= frames[k]; ++t) spiked |= train[t] != 0;
      const double d = f[frames[k]] - f[frames[k - 1]];
      if (spiked) {
        js += d;
        ++jn;
      } else {
        qs += d * d;
        ++qn;
      }
    }
    out.per_frame = ratio(js, jn, qs, qn);
  }
  return out;
}

ObservationGaussian moment_match_observation(double f, const CalciumModel& cal) {
  ObservationGaussian g;
  if (cal.saturation == Saturation::linear) {
    g.mean = (f - cal.offset) / cal.gain;
    g.var = cal.variance(g.mean) / (cal.gain * cal.gain);
    g.log_kappa = -std::log(std::abs(cal.gain));
    return g;
  }
  // Linearize S at the inverse of F. Frames outside (0, 1) have no inverse;
  // linearizing at the clamped point keeps the mean F implies.
  const double fc = std::clamp(f, kHillClamp, 1.0 - kHillClamp);
  const double c = cal.kd * fc / (1.0 - fc);
  const double slope = cal.saturate_slope(c);
  g.mean = c + (f - cal.saturate(c)) / slope;
  g.var = cal.variance(c) / (slope * slope);
  g.log_kappa = -std::log(slope);
  return g;
}

MixtureComponent shift_component(const MixtureComponent& c, double decay, double baseline, double amplitude,
                                 bool spike) {
  const double keep = 1.0 - decay;
  MixtureComponent out = c;
  out.mean = (c.mean - decay * baseline - (spike ? amplitude : 0.0)) / keep;
  out.var = c.var / (keep * keep);
  out.log_weight = c.log_weight - std::log(keep);
  return out;
}

MixtureComponent observe_component(const MixtureComponent& c, const ObservationGaussian& obs) {
  MixtureComponent out = c;
  const double s = c.var + obs.var;
  out.mean = (obs.mean * c.var + c.mean * obs.var) / s;
  out.var = c.var * obs.var / s;
  out.log_weight = c.log_weight + obs.log_kappa + log_normal(c.mean, obs.mean, s);
  return out;
}

MixtureComponent observe_frame(const MixtureComponent& c, double f, const CalciumModel& cal, int iterations) {
  MixtureComponent out = c;
  double x = c.mean;
  for (int it = 0; it < std::max(1, iterations); ++it) {
    // F ~ N(h + slope (C - x), r) around x; Gaussian update of N(C; mean, var).
    x = std::max(x, 0.0);
    const double h = cal.saturate(x), slope = cal.saturate_slope(x), r = cal.variance(x);
    const double s = slope * slope * c.var + r;
    const double pred = h + slope * (c.mean - x);
    out.mean = c.mean + c.var * slope * (f - pred) / s;
    out.var = c.var * r / s;
    out.log_weight = c.log_weight + log_normal(f, pred, s);
    x = out.mean;
  }
  return out;
}

MixtureComponent merge_components(const MixtureComponent& a, const MixtureComponent& b) {
  if (a.log_weight == kNegInf) return b;
  if (b.log_weight == kNegInf) return a;
  MixtureComponent out;
  out.log_weight = log_add(a.log_weight, b.log_weight);
  const double wa = std::exp(a.log_weight - out.log_weight);
  const double wb = std::exp(b.log_weight - out.log_weight);
  out.mean = wa * a.mean + wb * b.mean;
  const double da = a.mean - out.mean, db = b.mean - out.mean;
  out.var = (wa * da * da + wb * db * db) + (wa * a.var + wb * b.var);
  out.spikes = b.spikes;
  return out;
}

namespace {

void prune(std::vector<MixtureComponent>& comps, const MixtureOptions& opt) {
  if (comps.empty()) return;
  double top = kNegInf;
  for (const auto& c : comps) top = std::max(top, c.log_weight);
  std::erase_if(comps, [&](const MixtureComponent& c) { return c.log_weight < top - opt.prune_nats; });
  if (static_cast<int>(comps.size()) > opt.max_components) {
    std::nth_element(comps.begin(), comps.begin() + opt.max_components, comps.end(),
                     [](const auto& x, const auto& y) { return x.log_weight > y.log_weight; });
    comps.resize(opt.max_components);
    std::sort(comps.begin(), comps.end(), [](const auto& x, const auto& y) { return x.spikes < y.spikes; });
  }
}

// Observation lookup by bin.
struct FrameIndex {
  std::vector<int> at;  // frame index per bin, -1 when none
  int last = -1;        // last frame bin

  FrameIndex(const FluorescenceTrace& trace, int bins) : at(bins, -1) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const int b = trace.bins[k];
      if (b < 0 || b >= bins) continue;
      at[b] = static_cast<int>(k);
      last = std::max(last, b);
    }
  }
};

}  // namespace

BackwardMixture::BackwardMixture(const ConditionalChain& chain, const BackwardFilter& filter,
                                 const CalciumModel& cal, const FluorescenceTrace& trace,
                                 std::span<const std::uint8_t> row, double delta, const MixtureOptions& options)
    : begin_(chain.begin()), end_(chain.end()), states_(chain.num_states()) {
  const int bins = static_cast<int>(row.size());
  if (end_ > bins) throw std::invalid_argument("chain window exceeds the spike row");
  const double a = cal.decay(delta);
  const FrameIndex frames(trace, bins);
  std::vector<ObservationGaussian> obs(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) obs[k] = moment_match_observation(trace.values[k], cal);

  const auto observe_at = [&](int t, std::vector<MixtureComponent>& comps, bool was_flat) {
    const int k = frames.at[t];
    if (k < 0) return;
    if (was_flat) {
      comps.assign(1, MixtureComponent{obs[k].log_kappa, obs[k].mean, obs[k].var, 0});
      return;
    }
    if (cal.saturation == Saturation::hill && options.hill_iterations > 0) {
      for (auto& c : comps) c = observe_frame(c, trace.values[k], cal, options.hill_iterations);
    } else {
      for (auto& c : comps) c = observe_component(c, obs[k]);
    }
  };

  // Bins after the window carry fixed spikes: a single state-free mixture.
  std::vector<MixtureComponent> tail;
  bool tail_flat = true;
  for (int u = bins - 1; u >= end_; --u) {
    if (u + 1 < bins && !tail_flat) {
      for (auto& c : tail) c = shift_component(c, a, cal.baseline, cal.amplitude, row[u + 1] != 0);
    }
    observe_at(u, tail, tail_flat);
    if (frames.at[u] >= 0) tail_flat = false;
  }

  const int len = end_ - begin_;
  std::vector<std::vector<MixtureComponent>> next(states_), cur(states_);
  std::vector<std::vector<MixtureComponent>> levels(static_cast<std::size_t>(len));
  std::vector<std::vector<std::size_t>> level_offsets(static_cast<std::size_t>(len));
  flat_.assign(len, 1);
  bool next_flat = tail_flat;

  for (int t = end_ - 1; t >= begin_; --t) {
    const bool here_frame = frames.at[t] >= 0;
    const bool cur_flat = next_flat && !here_frame;
    for (std::uint32_t s = 0; s < states_; ++s) {
      auto& out = cur[s];
      out.clear();
      if (!next_flat) {
        if (t == end_ - 1) {
          out = tail;
          const bool spike = row[end_] != 0;
          for (auto& c : out) {
            c = shift_component(c, a, cal.baseline, cal.amplitude, spike);
            c.spikes += spike;
          }
        } else {
          const double p1 = filter.spike_posterior(t + 1, s);
          const double lw1 = p1 > 0.0 ? std::log(p1) : kNegInf;
          const double lw0 = p1 < 1.0 ? std::log1p(-p1) : kNegInf;
          const auto& plus = next[chain.successor(s, true)];
          const auto& minus = next[chain.successor(s, false)];
          std::size_t ip = 0, im = 0;
          // Both lists are sorted by spike count; pair (s+, k-1) with (s-, k).
          while ((lw1 != kNegInf && ip < plus.size()) || (lw0 != kNegInf && im < minus.size())) {
            const int kp = (lw1 != kNegInf && ip < plus.size()) ? plus[ip].spikes + 1 : std::numeric_limits<int>::max();
            const int km = (lw0 != kNegInf && im < minus.size()) ? minus[im].spikes : std::numeric_limits<int>::max();
            const int k = std::min(kp, km);
            MixtureComponent a1{kNegInf, 0.0, 1.0, k}, a0{kNegInf, 0.0, 1.0, k};
            if (kp == k) {
              a1 = shift_component(plus[ip++], a, cal.baseline, cal.amplitude, true);
              a1.log_weight += lw1;
              a1.spikes = k;
            }
            if (km == k) {
              a0 = shift_component(minus[im++], a, cal.baseline, cal.amplitude, false);
              a0.log_weight += lw0;
            }
            out.push_back(merge_components(a1, a0));
          }
        }
      }
      observe_at(t, out, next_flat);
      prune(out, options);
    }
    const int k = t - begin_;
    flat_[k] = cur_flat;
    auto& store = levels[k];
    auto& offs = level_offsets[k];
    offs.assign(states_ + 1, 0);
    for (std::uint32_t s = 0; s < states_; ++s) offs[s + 1] = offs[s] + cur[s].size();
    store.reserve(offs[states_]);
    for (std::uint32_t s = 0; s < states_; ++s) store.insert(store.end(), cur[s].begin(), cur[s].end());
    std::swap(next, cur);
    next_flat = cur_flat;
  }

  offsets_.assign(static_cast<std::size_t>(len) * states_ + 1, 0);
  std::size_t total = 0;
  for (int k = 0; k < len; ++k) total += levels[k].size();
  comps_.reserve(total);
  for (int k = 0; k < len; ++k) {
    const std::size_t base = comps_.size();
    for (std::uint32_t s = 0; s < states_; ++s) offsets_[static_cast<std::size_t>(k) * states_ + s] = base + level_offsets[k][s];
    comps_.insert(comps_.end(), levels[k].begin(), levels[k].end());
    std::vector<MixtureComponent>().swap(levels[k]);
  }
  offsets_.back() = comps_.size();
}

std::span<const MixtureComponent> BackwardMixture::components(int t, std::uint32_t s) const {
  const std::size_t slot = static_cast<std::size_t>(t - begin_) * states_ + s;
  return std::span<const MixtureComponent>(comps_).subspan(offsets_[slot], offsets_[slot + 1] - offsets_[slot]);
}

double BackwardMixture::log_density(int t, std::uint32_t s, double c) const {
  if (flat(t)) return 0.0;
  double acc = kNegInf;
  for (const auto& comp : components(t, s)) acc = log_add(acc, comp.log_weight + log_normal(c, comp.mean, comp.var));
  return acc;
}

CalciumProposal::CalciumProposal(const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                                 const FluorescenceTrace& trace, const CalciumConfig& cfg)
    : block_(block),
      delta_(model.delta()),
      cal_(cfg.model),
      start_calcium_(cfg.model.baseline),
      spiking_(model, i, raster, block, cfg.chain) {
  cal_.validate(delta_);
  const auto row = raster.row(i);
  if (block.begin > 0) start_calcium_ = calcium_path(cal_, row.first(block.begin), delta_).back();
  const auto& chain = spiking_.chain();
  for (int t = block.end; t < chain.end(); ++t) forced_tail_.push_back(row[t]);
  mixture_ = std::make_unique<BackwardMixture>(chain, spiking_.filter(), cal_, trace, row, delta_, cfg.mixture);
}

template <typename Choose>
double CalciumProposal::run(Choose&& choose) {
  const auto& chain = spiking_.chain();
  const auto& filter = spiking_.filter();
  const double a = cal_.decay(delta_);
  std::uint32_t s = chain.initial_state();
  double c = start_calcium_;
  double lq = 0.0;
  last_calcium_.resize(block_.length());
  for (int t = chain.begin(); t < chain.end(); ++t) {
    bool spike;
    if (chain.forced(t) >= 0) {
      spike = chain.forced(t) == 1;
    } else {
      const double p1 = filter.spike_posterior(t, s);
      double l1 = p1 > 0.0 ? std::log(p1) : kNegInf;
      double l0 = p1 < 1.0 ? std::log1p(-p1) : kNegInf;
      if (!mixture_->flat(t)) {
        if (l1 != kNegInf) l1 += mixture_->log_density(t, chain.successor(s, true), step_calcium(cal_, c, a, true));
        if (l0 != kNegInf) l0 += mixture_->log_density(t, chain.successor(s, false), step_calcium(cal_, c, a, false));
      }
      const double z = log_add(l1, l0);
      if (z == kNegInf) throw NumericalError("fluorescence proposal has zero mass at bin " + std::to_string(t));
      const double q1 = std::exp(l1 - z);
      spike = choose(t, q1);
      lq += spike ? l1 - z : l0 - z;
    }
    c = step_calcium(cal_, c, a, spike);
    if (block_.contains(t)) last_calcium_[t - block_.begin] = c;
    s = chain.successor(s, spike);
  }
  return lq;
}

ProposalTrace CalciumProposal::sample(Rng& rng) {
  ProposalTrace out;
  out.train.resize(block_.length());
  out.log_q = run([&](int t, double q1) {
    const bool spike = bernoulli(rng, q1);
    if (block_.contains(t)) out.train[t - block_.begin] = spike;
    return spike;
  });
  return out;
}

double CalciumProposal::log_q(std::span<const std::uint8_t> train) {
  if (static_cast<int>(train.size()) != block_.length()) throw std::invalid_argument("train length mismatch");
  return run([&](int t, double) { return train[t - block_.begin] != 0; });
}

std::size_t CalciumProposal::memory_bytes() const {
  return spiking_.memory_bytes() + mixture_->total_components() * sizeof(MixtureComponent);
}

FluorescenceObservation::FluorescenceObservation(int neurons, CalciumModel cal, double delta)
    : cal_(cal), delta_(delta), traces_(neurons) {
  cal_.validate(delta);
}

void FluorescenceObservation::set_trace(int i, FluorescenceTrace trace) { traces_.at(i) = std::move(trace); }

const FluorescenceTrace* FluorescenceObservation::trace(int i) const {
  return traces_.at(i) ? &*traces_[i] : nullptr;
}

bool FluorescenceObservation::observes(int i) const { return i >= 0 && i < static_cast<int>(traces_.size()) && traces_[i]; }

double FluorescenceObservation::log_likelihood(int i, std::span<const std::uint8_t> row, int from, int to) const {
  return fluorescence_log_likelihood(cal_, *traces_.at(i), row, delta_, from, to);
}

int FluorescenceObservation::gibbs_window() const {
  return std::max(1, static_cast<int>(std::ceil(cal_.gibbs_time_constants * cal_.tau / delta_)));
}

std::unique_ptr<BlockProposal> CalciumProposalFactory::make(const NetworkModel& model, int i,
                                                            const SpikeRaster& raster, Block block) const {
  const auto* trace = obs_->trace(i);
  if (!trace) throw std::invalid_argument("neuron has no fluorescence trace");
  return std::make_unique<CalciumProposal>(model, i, raster, block, *trace, cfg_);
}

std::vector<std::uint8_t> CalciumProposalFactory::context_key(const NetworkModel&, int i, const SpikeRaster& raster,
                                                              Block block) const {
  const auto row = raster.row(i);
  std::vector<std::uint8_t> key(row.begin(), row.begin() + block.begin);
  key.insert(key.end(), row.begin() + block.end, row.end());
  return key;
}

FluorProposalResult fluor_proposal_sample(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          const FluorescenceTrace& trace, const CalciumConfig& cfg, Block block,
                                          std::uint64_t seed) {
  CalciumProposal p(model, i, raster, block, trace, cfg);
  Rng rng(seed);
  FluorProposalResult out;
  out.trace = p.sample(rng);
  out.calcium = p.last_calcium();
  return out;
}

BlockUpdate fluor_mh_update(const NetworkModel& model, int i, SpikeRaster& raster, const FluorescenceTrace& trace,
                            const CalciumConfig& cfg, Block block, std::uint64_t seed, JointForm form) {
  FluorescenceObservation obs(model.neurons(), cfg.model, model.delta());
  obs.set_trace(i, trace);
  CalciumProposal p(model, i, raster, block, trace, cfg);
  Rng rng(seed);
  return mh_block_update(model, i, raster, block, p, rng, form, &obs);
}

}  // namespace spikesamp
