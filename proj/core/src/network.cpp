#include "spikesamp/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spikesamp {

CouplingKernel::CouplingKernel(std::vector<double> weights) : weights_(std::move(weights)) {
  while (!weights_.empty() && weights_.back() == 0.0) weights_.pop_back();
}

bool CouplingKernel::is_zero() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w == 0.0; });
}

CouplingKernel CouplingKernel::truncated(int max_lag) const {
  const auto n = static_cast<std::size_t>(std::clamp(max_lag, 0, support()));
  return CouplingKernel(std::vector<double>(weights_.begin(), weights_.begin() + n));
}

CouplingKernel CouplingKernel::scaled(double c) const {
  std::vector<double> w(weights_);
  for (auto& x : w) {
    if (x > kHardInputThreshold) x *= c;
  }
  return CouplingKernel(std::move(w));
}

SpikeRaster::SpikeRaster(int neurons, int bins, double delta)
    : neurons_(neurons), bins_(bins), delta_(delta) {
  if (neurons < 1 || bins < 1) throw std::invalid_argument("raster needs N >= 1 and T >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("raster bin width must be positive");
  bits_.assign(static_cast<std::size_t>(neurons) * static_cast<std::size_t>(bins), 0);
}

std::span<const std::uint8_t> SpikeRaster::row(int i) const {
  return {bits_.data() + index(i, 0), static_cast<std::size_t>(bins_)};
}

std::span<std::uint8_t> SpikeRaster::row(int i) {
  return {bits_.data() + index(i, 0), static_cast<std::size_t>(bins_)};
}

long SpikeRaster::spike_count(int i) const {
  auto r = row(i);
  return std::accumulate(r.begin(), r.end(), 0L);
}

long SpikeRaster::spike_count() const { return std::accumulate(bits_.begin(), bits_.end(), 0L); }

NetworkModel::NetworkModel(int neurons, double delta, std::vector<std::vector<double>> baselines,
                           std::vector<Entry> kernels, Nonlinearity nonlinearity)
    : neurons_(neurons),
      delta_(delta),
      baselines_(std::move(baselines)),
      entries_(std::move(kernels)),
      nonlinearity_(std::move(nonlinearity)) {
  if (neurons_ < 1) throw std::invalid_argument("network needs at least one neuron");
  if (!(delta_ > 0.0)) throw std::invalid_argument("bin width must be positive");
  if (static_cast<int>(baselines_.size()) != neurons_) {
    throw std::invalid_argument("expected one baseline entry per neuron");
  }
  for (const auto& b : baselines_) {
    if (b.empty()) throw std::invalid_argument("empty baseline series");
  }
  std::vector<char> has_self(neurons_, 0);
  std::vector<char> seen(static_cast<std::size_t>(neurons_) * neurons_, 0);
  for (const auto& e : entries_) {
    if (e.post < 0 || e.post >= neurons_ || e.pre < 0 || e.pre >= neurons_) {
      throw std::out_of_range("kernel index out of range");
    }
    auto& s = seen[static_cast<std::size_t>(e.post) * neurons_ + e.pre];
    if (s) throw std::invalid_argument("duplicate kernel for pair (" + std::to_string(e.post) + ", " +
                                       std::to_string(e.pre) + ")");
    s = 1;
    if (e.post == e.pre) has_self[e.post] = 1;
  }
  for (int i = 0; i < neurons_; ++i) {
    if (!has_self[i]) entries_.push_back({i, i, CouplingKernel{}});
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.post != b.post ? a.post < b.post : a.pre < b.pre;
  });
  index_links();
}

NetworkModel::NetworkModel(const NetworkModel& other)
    : neurons_(other.neurons_),
      delta_(other.delta_),
      baselines_(other.baselines_),
      entries_(other.entries_),
      nonlinearity_(other.nonlinearity_) {
  index_links();
}

NetworkModel::NetworkModel(NetworkModel&& other) noexcept
    : neurons_(other.neurons_),
      delta_(other.delta_),
      baselines_(std::move(other.baselines_)),
      entries_(std::move(other.entries_)),
      nonlinearity_(std::move(other.nonlinearity_)),
      max_lag_(other.max_lag_),
      self_index_(std::move(other.self_index_)),
      incoming_(std::move(other.incoming_)),
      outgoing_(std::move(other.outgoing_)) {}

NetworkModel& NetworkModel::operator=(const NetworkModel& other) {
  if (this != &other) {
    NetworkModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

NetworkModel& NetworkModel::operator=(NetworkModel&& other) noexcept {
  neurons_ = other.neurons_;
  delta_ = other.delta_;
  baselines_ = std::move(other.baselines_);
  entries_ = std::move(other.entries_);
  nonlinearity_ = std::move(other.nonlinearity_);
  max_lag_ = other.max_lag_;
  self_index_ = std::move(other.self_index_);
  incoming_ = std::move(other.incoming_);
  outgoing_ = std::move(other.outgoing_);
  return *this;
}

void NetworkModel::index_links() {
  max_lag_ = 0;
  self_index_.assign(neurons_, -1);
  incoming_.assign(neurons_, {});
  outgoing_.assign(neurons_, {});
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    max_lag_ = std::max(max_lag_, e.kernel.support());
    if (e.post == e.pre) self_index_[e.post] = static_cast<int>(k);
    if (e.kernel.support() == 0 && e.post != e.pre) continue;
    incoming_[e.post].push_back({e.pre, &e.kernel});
    if (e.post != e.pre) outgoing_[e.pre].push_back({e.post, &e.kernel});
  }
}

double NetworkModel::baseline(int i, int t) const {
  const auto& b = baselines_[i];
  if (b.size() == 1) return b[0];
  if (t < 0 || static_cast<std::size_t>(t) >= b.size()) {
    throw std::out_of_range("bin " + std::to_string(t) + " beyond baseline series of neuron " +
                            std::to_string(i));
  }
  return b[t];
}

std::optional<int> NetworkModel::baseline_horizon() const {
  std::optional<int> h;
  for (const auto& b : baselines_) {
    if (b.size() > 1) h = std::min(h.value_or(std::numeric_limits<int>::max()), static_cast<int>(b.size()));
  }
  return h;
}

const CouplingKernel& NetworkModel::self_kernel(int i) const { return entries_[self_index_[i]].kernel; }

const CouplingKernel* NetworkModel::kernel(int i, int j) const {
  if (i == j) return &self_kernel(i);
  for (const auto& link : incoming_[i]) {
    if (link.neuron == j) return link.kernel;
  }
  return nullptr;
}

int NetworkModel::influence_lag(int i) const {
  int k = self_kernel(i).support();
  for (const auto& link : outgoing_[i]) k = std::max(k, link.kernel->support());
  return k;
}

NetworkModel NetworkModel::with_coupling_scale(double c) const {
  std::vector<Entry> scaled;
  scaled.reserve(entries_.size());
  for (const auto& e : entries_) scaled.push_back({e.post, e.pre, e.kernel.scaled(c)});
  return NetworkModel(neurons_, delta_, baselines_, std::move(scaled), nonlinearity_);
}

NetworkModel NetworkModel::with_baselines(std::vector<std::vector<double>> baselines) const {
  return NetworkModel(neurons_, delta_, std::move(baselines), entries_, nonlinearity_);
}

NetworkGenConfig NetworkGenConfig::toy() {
  NetworkGenConfig cfg;
  cfg.coupling_support = 0.020;
  cfg.self_support = 0.020;
  return cfg;
}

namespace {

int bins_for(double seconds, double delta) {
  return static_cast<int>(std::lround(seconds / delta));
}

std::vector<NetworkModel::Entry> random_kernels(const NetworkGenConfig& cfg, Rng& rng,
                                                std::vector<bool>& excitatory) {
  const int n = cfg.neurons;
  const int excit = static_cast<int>(std::lround(cfg.fraction_excitatory * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  excitatory.assign(n, false);
  for (int k = 0; k < excit; ++k) excitatory[order[k]] = true;

  const int cross_lags = std::max(1, bins_for(cfg.coupling_support, cfg.delta));
  std::vector<double> shape(cross_lags);
  for (int l = 1; l <= cross_lags; ++l) {
    shape[l - 1] = std::exp(-(l - 1) * cfg.delta / cfg.coupling_time_constant);
  }
  // Log-normal amplitudes with unit mean and 0.5 log-scale spread.
  std::lognormal_distribution<double> amplitude(-0.125, 0.5);

  std::vector<NetworkModel::Entry> entries;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (uniform01(rng) >= cfg.connection_probability) continue;
      const double amp = amplitude(rng) *
                         (excitatory[j] ? cfg.excitatory_weight : -cfg.inhibitory_weight) *
                         cfg.coupling_scale;
      std::vector<double> w(cross_lags);
      for (int l = 0; l < cross_lags; ++l) w[l] = amp * shape[l];
      entries.push_back({i, j, CouplingKernel(std::move(w))});
    }
  }

  const int refractory_lags = bins_for(cfg.absolute_refractory, cfg.delta);
  const int self_lags = std::max(refractory_lags, bins_for(cfg.self_support, cfg.delta));
  std::vector<double> self(self_lags);
  for (int l = 1; l <= self_lags; ++l) {
    self[l - 1] = l <= refractory_lags
                      ? kRefractoryWeight
                      : -cfg.self_inhibition_amplitude * cfg.coupling_scale *
                            std::exp(-(l - refractory_lags - 1) * cfg.delta / cfg.self_inhibition_timescale);
  }
  for (int i = 0; i < n; ++i) entries.push_back({i, i, CouplingKernel(self)});
  return entries;
}

void validate(const NetworkGenConfig& cfg) {
  if (cfg.neurons < 2) throw std::invalid_argument("random network needs N >= 2");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("bin width must be positive");
  if (cfg.delta > cfg.absolute_refractory + 1e-15) {
    throw std::invalid_argument("bin width must not exceed the absolute refractory period");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(cfg.fraction_excitatory) || !prob(cfg.connection_probability)) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  if (!(cfg.coupling_time_constant > 0.0) || !(cfg.self_inhibition_timescale > 0.0) ||
      !(cfg.absolute_refractory > 0.0)) {
    throw std::invalid_argument("time constants must be positive");
  }
  if (!(cfg.target_rate > 0.0)) throw std::invalid_argument("target rate must be positive");
}

}  // namespace

GeneratedNetwork generate_network(const NetworkGenConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(derive_seed(seed, {1}));
  std::vector<bool> excitatory;
  auto entries = random_kernels(cfg, rng, excitatory);

  const int n = cfg.neurons;
  const auto make = [&](double b) {
    return NetworkModel(n, cfg.delta, std::vector<std::vector<double>>(n, std::vector<double>{b}), entries,
                        Nonlinearity::exponential());
  };

  // Bisection on a shared constant baseline against pilot simulations with
  // common random numbers.
  const int pilot_bins = std::max(1, bins_for(cfg.pilot_duration, cfg.delta));
  const std::uint64_t pilot_seed = derive_seed(seed, {2});
  const auto pilot_rate = [&](const NetworkModel& m) {
    const auto r = simulate(m, pilot_bins, pilot_seed);
    return static_cast<double>(r.spike_count()) / (static_cast<double>(n) * pilot_bins * cfg.delta);
  };

  double lo = std::log(cfg.target_rate) - 12.0;
  double hi = std::log(cfg.target_rate) + 6.0;
  double b = std::log(cfg.target_rate);
  double rate = pilot_rate(make(b));
  for (int iter = 0; iter < 60 && std::abs(rate - cfg.target_rate) > cfg.rate_tolerance * cfg.target_rate;
       ++iter) {
    (rate < cfg.target_rate ? lo : hi) = b;
    b = 0.5 * (lo + hi);
    rate = pilot_rate(make(b));
  }
  return {make(b), std::move(excitatory), rate};
}

NetworkModel build_random_network(const NetworkGenConfig& cfg, std::uint64_t seed) {
  return generate_network(cfg, seed).model;
}

double total_input(const NetworkModel& model, const SpikeRaster& raster, int i, int t) {
  if (i < 0 || i >= model.neurons() || i >= raster.neurons()) throw std::out_of_range("neuron index");
  if (t < 0 || t >= raster.bins()) throw std::out_of_range("bin index");
  double j = model.baseline(i, t);
  for (const auto& link : model.incoming(i)) {
    const auto& k = *link.kernel;
    for (int lag = 1; lag <= k.support() && t - lag >= 0; ++lag) {
      if (raster.at(link.neuron, t - lag)) j += k.at(lag);
    }
  }
  return j;
}

std::vector<double> input_series(const NetworkModel& model, const SpikeRaster& raster, int i, int t0,
                                 int t1, int exclude, bool with_baseline) {
  std::vector<double> out(static_cast<std::size_t>(std::max(0, t1 - t0)), 0.0);
  if (with_baseline) {
    for (int t = t0; t < t1; ++t) out[t - t0] = model.baseline(i, t);
  }
  for (const auto& link : model.incoming(i)) {
    if (link.neuron == exclude) continue;
    const auto w = link.kernel->weights();
    const int support = static_cast<int>(w.size());
    const auto row = raster.row(link.neuron);
    for (int s = std::max(0, t0 - support); s < t1 - 1; ++s) {
      if (!row[s]) continue;
      const int first = std::max(1, t0 - s);
      const int last = std::min(support, t1 - 1 - s);
      for (int lag = first; lag <= last; ++lag) out[s + lag - t0] += w[lag - 1];
    }
  }
  return out;
}

SimulationResult simulate_network(const NetworkModel& model, int bins, std::uint64_t seed) {
  if (bins < 1) throw std::invalid_argument("simulation needs T >= 1");
  const int n = model.neurons();
  const double delta = model.delta();
  const int ring = model.max_lag() + 1;
  SimulationResult result{SpikeRaster(n, bins, delta), 0};
  std::vector<double> pending(static_cast<std::size_t>(n) * ring, 0.0);
  Rng rng(seed);
  const auto& f = model.nonlinearity();
  for (int t = 0; t < bins; ++t) {
    const int slot = t % ring;
    for (int i = 0; i < n; ++i) {
      auto& acc = pending[static_cast<std::size_t>(i) * ring + slot];
      const double j = model.baseline(i, t) + acc;
      acc = 0.0;
      bool clamped = false;
      const double p = spike_probability(f, j, delta, &clamped);
      if (clamped) ++result.clamped_bins;
      if (!bernoulli(rng, p)) continue;
      result.raster.set(i, t, true);
      const auto add = [&](int post, const CouplingKernel& k) {
        const auto w = k.weights();
        for (int lag = 1; lag <= static_cast<int>(w.size()); ++lag) {
          pending[static_cast<std::size_t>(post) * ring + (t + lag) % ring] += w[lag - 1];
        }
      };
      add(i, model.self_kernel(i));
      for (const auto& link : model.outgoing(i)) add(link.neuron, *link.kernel);
    }
  }
  return result;
}

SpikeRaster simulate(const NetworkModel& model, int bins, std::uint64_t seed) {
  return simulate_network(model, bins, seed).raster;
}

double log_joint_terms(const NetworkModel& model, const SpikeRaster& raster, std::span<const int> neurons,
                       int t0, int t1, JointForm form) {
  t0 = std::max(t0, 0);
  t1 = std::min(t1, raster.bins());
  double total = 0.0;
  const auto& f = model.nonlinearity();
  for (int i : neurons) {
    const auto j = input_series(model, raster, i, t0, t1);
    const auto row = raster.row(i);
    for (int t = t0; t < t1; ++t) {
      total += spike_log_mass(f, j[t - t0], model.delta(), row[t] != 0, form);
      if (total == -std::numeric_limits<double>::infinity()) return total;
    }
  }
  return total;
}

double log_joint(const NetworkModel& model, const SpikeRaster& raster, JointForm form) {
  if (raster.neurons() != model.neurons()) throw std::invalid_argument("raster does not match model");
  std::vector<int> all(model.neurons());
  std::iota(all.begin(), all.end(), 0);
  return log_joint_terms(model, raster, all, 0, raster.bins(), form);
}

}  // namespace spikesamp
