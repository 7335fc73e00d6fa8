#include "spikesamp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "spikesamp/diagnostics.hpp"
#include "spikesamp/errors.hpp"
#include "spikesamp/proposals.hpp"

namespace spikesamp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::homogeneous: return "homogeneous";
    case SamplerKind::delayed_input: return "delayed";
    case SamplerKind::weak_coupling: return "weak_coupling";
    case SamplerKind::hybrid: return "hybrid";
    case SamplerKind::truncated_only: return "truncated_only";
    case SamplerKind::weak_cross: return "weak_cross";
    case SamplerKind::exact: return "exact";
    case SamplerKind::gibbs: return "gibbs";
    case SamplerKind::calcium: return "calcium";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  static const std::vector<std::pair<std::string, SamplerKind>> names = {
      {"homogeneous", SamplerKind::homogeneous},   {"delayed", SamplerKind::delayed_input},
      {"delayed_input", SamplerKind::delayed_input}, {"weak_coupling", SamplerKind::weak_coupling},
      {"weak", SamplerKind::weak_coupling},        {"hybrid", SamplerKind::hybrid},
      {"truncated_only", SamplerKind::truncated_only}, {"weak_cross", SamplerKind::weak_cross},
      {"exact", SamplerKind::exact},               {"gibbs", SamplerKind::gibbs},
      {"calcium", SamplerKind::calcium}};
  for (const auto& [n, k] : names) {
    if (n == name) return k;
  }
  throw ConfigError("unknown sampler '" + name + "'");
}

namespace {

template <typename T>
void get_to(const Json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(what + "." + key + ": " + e.what());
  }
}

void allow_keys(const Json& j, const std::set<std::string>& keys, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + what);
  }
}

}  // namespace

SamplerConfig sampler_from_json(const Json& j, SamplerConfig c) {
  const std::string w = "sampler";
  allow_keys(j,
             {"kind", "block_length", "burn_in", "samples", "form", "random_scan", "initialize_from_proposal",
              "homogeneous_rate", "hybrid", "prune_nats", "max_components",
              "hill_iterations"},
             w);
  if (j.contains("kind")) {
    std::string k;
    get_to(j, "kind", k, w);
    c.kind = sampler_kind_from_string(k);
  }
  get_to(j, "block_length", c.block_length, w);
  get_to(j, "burn_in", c.burn_in, w);
  get_to(j, "samples", c.samples, w);
  if (j.contains("form")) {
    std::string f;
    get_to(j, "form", f, w);
    if (f == "bernoulli") {
      c.form = JointForm::bernoulli;
    } else if (f == "poisson") {
      c.form = JointForm::poisson;
    } else {
      throw ConfigError("sampler.form must be 'bernoulli' or 'poisson'");
    }
  }
  get_to(j, "random_scan", c.random_scan, w);
  get_to(j, "initialize_from_proposal", c.initialize_from_proposal, w);
  get_to(j, "homogeneous_rate", c.homogeneous_rate, w);
  if (j.contains("hybrid")) c.hybrid = hybrid_from_json(j.at("hybrid"), c.hybrid);
  get_to(j, "prune_nats", c.mixture.prune_nats, w);
  get_to(j, "max_components", c.mixture.max_components, w);
  get_to(j, "hill_iterations", c.mixture.hill_iterations, w);
  if (c.mixture.hill_iterations < 0) throw ConfigError("sampler.hill_iterations must be >= 0");
  if (c.samples < 1) throw ConfigError("sampler.samples must be >= 1");
  if (c.burn_in < 0) throw ConfigError("sampler.burn_in must be >= 0");
  if (c.block_length < -1) throw ConfigError("sampler.block_length must be >= -1");
  if (c.homogeneous_rate < 0.0) throw ConfigError("sampler.homogeneous_rate must be >= 0");
  return c;
}

Json sampler_to_json(const SamplerConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"block_length", c.block_length},
          {"burn_in", c.burn_in},
          {"samples", c.samples},
          {"form", c.form == JointForm::bernoulli ? "bernoulli" : "poisson"},
          {"random_scan", c.random_scan},
          {"initialize_from_proposal", c.initialize_from_proposal},
          {"homogeneous_rate", c.homogeneous_rate},
          {"hybrid", hybrid_to_json(c.hybrid)},
          {"prune_nats", c.mixture.prune_nats},
          {"max_components", c.mixture.max_components},
          {"hill_iterations", c.mixture.hill_iterations}};
}

ExperimentConfig experiment_from_json(const Json& j, ExperimentConfig c) {
  const std::string w = "config";
  allow_keys(j,
             {"command", "network", "network_file", "raster_file", "fluorescence_file", "duration", "hidden",
              "sampler", "calcium", "esnr", "acf_lags", "axis", "grid", "samplers", "trials", "figure", "scale",
              "paper_scale", "seed", "out"},
             w);
  get_to(j, "command", c.command, w);
  if (j.contains("network")) c.network = network_gen_from_json(j.at("network"), c.network);
  get_to(j, "network_file", c.network_file, w);
  get_to(j, "raster_file", c.raster_file, w);
  get_to(j, "fluorescence_file", c.fluorescence_file, w);
  get_to(j, "duration", c.duration, w);
  get_to(j, "hidden", c.hidden, w);
  if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"), c.sampler);
  if (j.contains("calcium")) {
    const auto& cal = j.at("calcium");
    if (cal.is_string()) {
      c.calcium_preset = cal.get<std::string>();
      c.calcium = calcium_preset(c.calcium_preset);
    } else {
      if (cal.contains("name") && cal.at("name").is_string()) {
        c.calcium_preset = cal.at("name").get<std::string>();
        c.calcium = calcium_preset(c.calcium_preset);
      }
      c.calcium = calcium_from_json(cal, c.calcium);
    }
  }
  get_to(j, "esnr", c.esnr, w);
  get_to(j, "acf_lags", c.acf_lags, w);
  get_to(j, "axis", c.axis, w);
  get_to(j, "grid", c.grid, w);
  if (j.contains("samplers")) {
    std::vector<std::string> names;
    get_to(j, "samplers", names, w);
    c.samplers.clear();
    for (const auto& n : names) c.samplers.push_back(sampler_kind_from_string(n));
  }
  get_to(j, "trials", c.trials, w);
  get_to(j, "figure", c.figure, w);
  get_to(j, "scale", c.scale, w);
  get_to(j, "paper_scale", c.paper_scale, w);
  get_to(j, "seed", c.seed, w);
  if (j.contains("out")) {
    std::string o;
    get_to(j, "out", o, w);
    c.out = o;
  }
  if (!(c.duration > 0.0)) throw ConfigError("duration must be positive");
  if (c.hidden.empty()) throw ConfigError("hidden must list at least one neuron");
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.scale < 0.0) throw ConfigError("scale must be >= 0");
  if (c.acf_lags < 1) throw ConfigError("acf_lags must be >= 1");
  if (c.esnr < 0.0) throw ConfigError("esnr must be >= 0");
  static const std::set<std::string> axes = {"C", "N", "T", "esnr"};
  if (!axes.count(c.axis)) throw ConfigError("axis must be one of C, N, T, esnr");
  return c;
}

Json experiment_to_json(const ExperimentConfig& c) {
  Json samplers = Json::array();
  for (auto k : c.samplers) samplers.push_back(to_string(k));
  Json cal = calcium_to_json(c.calcium);
  if (!c.calcium_preset.empty()) cal["name"] = c.calcium_preset;
  return {{"command", c.command},
          {"network", network_gen_to_json(c.network)},
          {"network_file", c.network_file},
          {"raster_file", c.raster_file},
          {"fluorescence_file", c.fluorescence_file},
          {"duration", c.duration},
          {"hidden", c.hidden},
          {"sampler", sampler_to_json(c.sampler)},
          {"calcium", cal},
          {"esnr", c.esnr},
          {"acf_lags", c.acf_lags},
          {"axis", c.axis},
          {"grid", c.grid},
          {"samplers", samplers},
          {"trials", c.trials},
          {"figure", c.figure},
          {"scale", c.scale},
          {"paper_scale", c.paper_scale},
          {"seed", c.seed},
          {"out", c.out.string()}};
}

// ---------------------------------------------------------------- threads

int thread_count() {
  const char* env = std::getenv("SPIKESAMP_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("SPIKESAMP_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int k = next++; k < n; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- calcium presets

namespace {
constexpr int kCalibrationBins = 1000000;
}  // namespace

CalciumModel calibrate_noise(const CalciumModel& cal, double target, double rate, double delta, std::uint64_t seed) {
  if (!(target > 0.0)) throw ConfigError("target eSNR must be positive");
  CalciumModel unit = cal;
  const double norm = std::sqrt(cal.variance(cal.baseline));
  unit = cal.with_noise_scale(1.0 / norm);
  double s = 1.0;
  // Fixed-point iteration on the noise scale; the eSNR is close to 1/s so a
  // few steps suffice. The long trace keeps the seed-to-seed spread near 1%.
  for (int it = 0; it < 6; ++it) {
    const double e = effective_snr(unit.with_noise_scale(s), rate, delta, kCalibrationBins, seed).per_bin;
    s *= e / target;
  }
  return unit.with_noise_scale(s);
}

namespace {

constexpr double kPresetDelta = 0.002;
constexpr double kPresetRate = 5.0;

CalciumModel hill_base() {
  CalciumModel c;
  c.saturation = Saturation::hill;
  c.tau = 0.3;
  c.amplitude = 0.2;
  c.baseline = 0.02;
  c.kd = 1.0;
  c.noise_slope = 0.0;
  c.noise_floor = 1.0;
  c.frame_rate = 50.0;
  return c;
}

CalciumModel linear_base() {
  CalciumModel c = hill_base();
  c.saturation = Saturation::linear;
  c.gain = 1.0;
  c.offset = 0.0;
  return c;
}

}  // namespace

std::vector<std::string> calcium_preset_names() { return {"esnr2", "esnr5", "linear"}; }

CalciumModel calcium_preset(const std::string& name) {
  if (name == "esnr2") return calibrate_noise(hill_base(), 2.0, kPresetRate, kPresetDelta);
  if (name == "esnr5") return calibrate_noise(hill_base(), 5.0, kPresetRate, kPresetDelta);
  if (name == "linear") return calibrate_noise(linear_base(), 5.0, kPresetRate, kPresetDelta);
  if (name == "hill") return calibrate_noise(hill_base(), 5.0, kPresetRate, kPresetDelta);
  throw ConfigError("unknown calcium preset '" + name + "'");
}

// ---------------------------------------------------------------- samplers

std::unique_ptr<ProposalFactory> make_factory(const SamplerConfig& cfg, double rate,
                                              const FluorescenceObservation* obs) {
  HybridConfig h = cfg.hybrid;
  switch (cfg.kind) {
    case SamplerKind::homogeneous: {
      const double r = cfg.homogeneous_rate > 0.0 ? cfg.homogeneous_rate : rate;
      if (!(r > 0.0)) throw NumericalError("homogeneous proposal needs a positive rate");
      return std::make_unique<IntensityProposalFactory>(ProposalSpec{ProposalKind::homogeneous, r});
    }
    case SamplerKind::delayed_input:
      return std::make_unique<IntensityProposalFactory>(ProposalSpec{ProposalKind::delayed_input, 0.0});
    case SamplerKind::weak_coupling:
      return std::make_unique<IntensityProposalFactory>(ProposalSpec{ProposalKind::weak_coupling, 0.0});
    case SamplerKind::hybrid:
      h.variant = HybridVariant::hybrid;
      return std::make_unique<HybridProposalFactory>(h);
    case SamplerKind::truncated_only:
      h.variant = HybridVariant::truncated_only;
      return std::make_unique<HybridProposalFactory>(h);
    case SamplerKind::weak_cross:
      h.variant = HybridVariant::weak_cross;
      return std::make_unique<HybridProposalFactory>(h);
    case SamplerKind::exact:
      h.exact = true;
      return std::make_unique<HybridProposalFactory>(h);
    case SamplerKind::gibbs:
      return nullptr;
    case SamplerKind::calcium: {
      if (!obs) throw ConfigError("the calcium sampler needs a fluorescence observation");
      CalciumConfig cc;
      cc.model = obs->model();
      cc.chain = h;
      cc.mixture = cfg.mixture;
      return std::make_unique<CalciumProposalFactory>(cc, *obs);
    }
  }
  throw ConfigError("unhandled sampler");
}

ChainConfig chain_config(const SamplerConfig& cfg, std::uint64_t seed) {
  ChainConfig c;
  c.block_length = cfg.block_length;
  if (c.block_length < 0) c.block_length = cfg.kind == SamplerKind::calcium ? kCalciumBlock : 0;
  c.burn_in = cfg.burn_in;
  c.samples = cfg.samples;
  c.seed = seed;
  c.form = cfg.form;
  c.random_scan = cfg.random_scan;
  c.initialize_from_proposal = cfg.initialize_from_proposal;
  return c;
}

double observed_rate(const SpikeRaster& raster, std::span<const int> hidden) {
  long spikes = 0;
  int count = 0;
  for (int j = 0; j < raster.neurons(); ++j) {
    if (std::find(hidden.begin(), hidden.end(), j) != hidden.end()) continue;
    spikes += raster.spike_count(j);
    ++count;
  }
  if (count == 0) return 0.0;
  return static_cast<double>(spikes) / count / (raster.bins() * raster.delta());
}

// ---------------------------------------------------------------- helpers

namespace {

int bins_for(double seconds, double delta) { return std::max(1, static_cast<int>(std::lround(seconds / delta))); }

struct Instance {
  NetworkModel model;
  SpikeRaster raster;
};

NetworkModel load_or_generate(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.network_file.empty()) return network_from_json(read_json_file(cfg.network_file));
  return build_random_network(cfg.network, seed);
}

void check_hidden(const ExperimentConfig& cfg, int neurons) {
  for (int i : cfg.hidden) {
    if (i < 0 || i >= neurons) throw ConfigError("hidden neuron " + std::to_string(i) + " out of range");
  }
}

SpikeRaster load_or_simulate(const ExperimentConfig& cfg, const NetworkModel& model, std::uint64_t seed) {
  if (!cfg.raster_file.empty()) {
    std::ifstream in(cfg.raster_file);
    if (!in) throw ConfigError("cannot open '" + cfg.raster_file + "'");
    return read_raster_csv(in, model.neurons(), bins_for(cfg.duration, model.delta()), model.delta());
  }
  return simulate(model, bins_for(cfg.duration, model.delta()), seed);
}

Instance make_instance(const ExperimentConfig& cfg) {
  auto model = load_or_generate(cfg, derive_seed(cfg.seed, {1}));
  auto raster = load_or_simulate(cfg, model, derive_seed(cfg.seed, {2}));
  check_hidden(cfg, model.neurons());
  return {std::move(model), std::move(raster)};
}

CalciumModel effective_calcium(const ExperimentConfig& cfg, double delta) {
  CalciumModel cal = cfg.esnr > 0.0 ? calibrate_noise(cfg.calcium, cfg.esnr, cfg.network.target_rate, delta)
                                    : cfg.calcium;
  cal.validate(delta);
  return cal;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t k = 0; k < header.size(); ++k) text_ << (k ? "," : "") << header[k];
    text_ << '\n';
  }
  Csv& cell(const std::string& v) {
    text_ << (pending_ ? "," : "") << v;
    ++pending_;
    return *this;
  }
  Csv& cell(double v) { return cell(format_double(v)); }
  Csv& cell(long v) { return cell(std::to_string(v)); }
  Csv& cell(int v) { return cell(std::to_string(v)); }
  void end_row() {
    if (pending_ != columns_) throw std::logic_error("CSV row has the wrong number of cells");
    text_ << '\n';
    pending_ = 0;
  }
  void save(const fs::path& path) const { write_text_file(path, text_.str()); }

 private:
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::ostringstream text_;
};

struct Manifest {
  Json j;
  Manifest(const std::string& command, const ExperimentConfig& cfg) {
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config"] = experiment_to_json(cfg);
    j["outputs"] = Json::array();
  }
  void output(const std::string& file, const std::vector<std::string>& columns, const std::string& description) {
    j["outputs"].push_back({{"file", file}, {"columns", columns}, {"description", description}});
  }
  void save(const fs::path& dir) const { write_json_file(dir / "manifest.json", j); }
};

std::vector<double> acf_or_empty(const TrainSet& trains, int lags) {
  try {
    return autocorrelation(trains, lags);
  } catch (const NumericalError&) {
    return {};
  }
}

struct ChainOutcome {
  ChainResult result;
  std::vector<std::vector<double>> rates;  // per hidden neuron
  std::vector<std::vector<double>> acf;    // per hidden neuron (empty when undefined)
};

// Runs one chain, streaming samples to `samples_path` when given.
ChainOutcome run_configured_chain(const NetworkModel& model, const SpikeRaster& raster, std::span<const int> hidden,
                                  const SamplerConfig& sampler, std::uint64_t seed, int acf_lags,
                                  const FluorescenceObservation* obs, const fs::path& samples_path = {}) {
  const auto factory = make_factory(sampler, observed_rate(raster, hidden), obs);
  std::ofstream samples;
  SampleSink sink;
  if (!samples_path.empty()) {
    fs::create_directories(samples_path.parent_path());
    samples.open(samples_path, std::ios::binary);
    if (!samples) throw std::runtime_error("cannot write '" + samples_path.string() + "'");
    write_samples_header(samples);
    sink = [&](int m, const SpikeRaster& r) { write_sample_rows(samples, m, r, hidden); };
  }
  ChainOutcome out{run_chain(model, raster, hidden, chain_config(sampler, seed), factory.get(), obs, sink, true), {}, {}};
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    const auto trains = out.result.samples.trains(h);
    out.rates.push_back(posterior_rate(trains, model.delta()));
    out.acf.push_back(acf_or_empty(trains, acf_lags));
  }
  return out;
}

Json chain_summary(const ChainOutcome& c, std::span<const int> hidden) {
  Json j = stats_to_json(c.result.stats);
  Json iat = Json::object();
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    if (!c.acf[h].empty()) iat[std::to_string(hidden[h])] = integrated_autocorrelation_time(c.acf[h]);
  }
  j["iat"] = iat;
  return j;
}

void write_chain_outputs(const ChainOutcome& c, std::span<const int> hidden, const fs::path& dir, Manifest& m) {
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    const std::string name = "marginals_" + std::to_string(hidden[h]) + ".csv";
    std::ostringstream os;
    write_marginals_csv(os, c.rates[h]);
    write_text_file(dir / name, os.str());
    m.output(name, {"bin", "rate"}, "posterior spiking rate (Hz) of neuron " + std::to_string(hidden[h]));
  }
  std::vector<std::string> header{"lag"};
  std::size_t lags = 0;
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    header.push_back("n" + std::to_string(hidden[h]));
    lags = std::max(lags, c.acf[h].size());
  }
  Csv acf(header);
  for (std::size_t l = 0; l < lags; ++l) {
    acf.cell(static_cast<long>(l));
    for (std::size_t h = 0; h < hidden.size(); ++h) acf.cell(l < c.acf[h].size() ? format_double(c.acf[h][l]) : "");
    acf.end_row();
  }
  acf.save(dir / "acf.csv");
  m.output("acf.csv", header, "sample-index autocorrelation per hidden neuron (empty: undefined)");
  write_json_file(dir / "stats.json", chain_summary(c, hidden));
  m.output("stats.json", {}, "acceptance counts, clamp count, IAT per neuron, wall-clock seconds");
}

// Hidden row replaced by zeros; proposals never see the true train.
SpikeRaster without_hidden(const SpikeRaster& raster, std::span<const int> hidden) {
  SpikeRaster r = raster;
  for (int i : hidden) {
    for (int t = 0; t < r.bins(); ++t) r.set(i, t, false);
  }
  return r;
}

FluorescenceObservation observe_hidden(const ExperimentConfig& cfg, const SpikeRaster& truth, const CalciumModel& cal,
                                       std::uint64_t seed, std::vector<CalciumSimulation>* sims = nullptr) {
  FluorescenceObservation obs(truth.neurons(), cal, truth.delta());
  for (std::size_t h = 0; h < cfg.hidden.size(); ++h) {
    const int i = cfg.hidden[h];
    if (h == 0 && !cfg.fluorescence_file.empty()) {
      std::ifstream in(cfg.fluorescence_file);
      if (!in) throw ConfigError("cannot open '" + cfg.fluorescence_file + "'");
      auto trace = read_fluorescence_csv(in, cal.frame_spacing(truth.delta()));
      if (!trace.bins.empty() && trace.bins.back() >= truth.bins()) {
        throw ConfigError("fluorescence frames extend past the raster");
      }
      obs.set_trace(i, std::move(trace));
      if (sims) sims->push_back({});
      continue;
    }
    auto sim = simulate_calcium(truth.row(i), cal, truth.delta(), derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    obs.set_trace(i, sim.trace);
    if (sims) sims->push_back(std::move(sim));
  }
  return obs;
}

}  // namespace

// ---------------------------------------------------------------- subcommands

void run_simulate(const ExperimentConfig& cfg) {
  const auto inst = make_instance(cfg);
  Manifest m("simulate", cfg);
  write_json_file(cfg.out / "network.json", network_to_json(inst.model));
  m.output("network.json", {}, "network: N, delta, nonlinearity, kernel triplets [i, j, lag, weight], baselines");
  std::ostringstream os;
  write_raster_csv(os, inst.raster);
  write_text_file(cfg.out / "raster.csv", os.str());
  m.output("raster.csv", {"neuron", "bin"}, "spike positions");
  if (cfg.command == "simulate" && (!cfg.calcium_preset.empty() || cfg.esnr > 0.0)) {
    const auto cal = effective_calcium(cfg, inst.model.delta());
    write_json_file(cfg.out / "calcium.json", calcium_to_json(cal));
    m.output("calcium.json", {}, "calcium model used for the traces");
    std::vector<CalciumSimulation> sims;
    ExperimentConfig sim_cfg = cfg;
    sim_cfg.fluorescence_file.clear();
    observe_hidden(sim_cfg, inst.raster, cal, derive_seed(cfg.seed, {4}), &sims);
    for (std::size_t h = 0; h < cfg.hidden.size(); ++h) {
      const std::string name = "fluorescence_" + std::to_string(cfg.hidden[h]) + ".csv";
      std::ostringstream f;
      write_fluorescence_csv(f, sims[h].trace);
      write_text_file(cfg.out / name, f.str());
      m.output(name, {"frame", "value"}, "fluorescence frames; frame k sits at bin (k+1)*spacing-1");
    }
  }
  m.j["spike_counts"] = Json::array();
  for (int i = 0; i < inst.raster.neurons(); ++i) m.j["spike_counts"].push_back(inst.raster.spike_count(i));
  m.save(cfg.out);
}

void run_sample(const ExperimentConfig& cfg) {
  if (cfg.sampler.kind == SamplerKind::calcium) throw ConfigError("use infer-calcium for the calcium sampler");
  const auto inst = make_instance(cfg);
  Manifest m("sample", cfg);
  const auto start = without_hidden(inst.raster, cfg.hidden);
  const auto c = run_configured_chain(inst.model, start, cfg.hidden, cfg.sampler, derive_seed(cfg.seed, {3}),
                                      cfg.acf_lags, nullptr, cfg.out / "samples.csv");
  m.output("samples.csv", {"sample", "neuron", "bin"}, "spikes of hidden neurons in every recorded sample");
  write_chain_outputs(c, cfg.hidden, cfg.out, m);
  m.save(cfg.out);
}

void run_infer_calcium(const ExperimentConfig& cfg) {
  const auto inst = make_instance(cfg);
  const auto cal = effective_calcium(cfg, inst.model.delta());
  Manifest m("infer-calcium", cfg);
  std::vector<CalciumSimulation> sims;
  const auto obs = observe_hidden(cfg, inst.raster, cal, derive_seed(cfg.seed, {4}), &sims);
  write_json_file(cfg.out / "calcium.json", calcium_to_json(cal));
  m.output("calcium.json", {}, "calcium model");
  for (std::size_t h = 0; h < cfg.hidden.size(); ++h) {
    const std::string name = "fluorescence_" + std::to_string(cfg.hidden[h]) + ".csv";
    std::ostringstream f;
    write_fluorescence_csv(f, *obs.trace(cfg.hidden[h]));
    write_text_file(cfg.out / name, f.str());
    m.output(name, {"frame", "value"}, "fluorescence frames used for inference");
  }
  SamplerConfig sampler = cfg.sampler;
  sampler.kind = SamplerKind::calcium;
  const auto start = without_hidden(inst.raster, cfg.hidden);
  const auto c = run_configured_chain(inst.model, start, cfg.hidden, sampler, derive_seed(cfg.seed, {3}),
                                      cfg.acf_lags, &obs, cfg.out / "samples.csv");
  m.output("samples.csv", {"sample", "neuron", "bin"}, "spikes of hidden neurons in every recorded sample");
  write_chain_outputs(c, cfg.hidden, cfg.out, m);
  const auto e = effective_snr(cal, cfg.network.target_rate, inst.model.delta());
  m.j["esnr"] = {{"per_bin", e.per_bin}, {"per_frame", e.per_frame}};
  m.save(cfg.out);
}

SweepTable run_sweep(const ExperimentConfig& cfg) {
  if (cfg.grid.empty()) throw ConfigError("sweep grid must be non-empty");
  const std::vector<SamplerKind> samplers = cfg.samplers.empty() ? std::vector<SamplerKind>{cfg.sampler.kind}
                                                                 : cfg.samplers;
  const int values = static_cast<int>(cfg.grid.size());
  const int kinds = static_cast<int>(samplers.size());
  for (double v : cfg.grid) {
    if (!(v > 0.0)) throw ConfigError("sweep grid values must be positive");
  }
  if (cfg.axis == "esnr") {
    for (auto k : samplers) {
      if (k != SamplerKind::calcium) throw ConfigError("the esnr axis needs the calcium sampler");
    }
  }
  std::vector<double> acc(static_cast<std::size_t>(values) * kinds * cfg.trials, 0.0);
  const int tasks = values * cfg.trials;
  parallel_for(tasks, thread_count(), [&](int task) {
    const int g = task / cfg.trials;
    const int trial = task % cfg.trials;
    const double v = cfg.grid[g];
    ExperimentConfig local = cfg;
    if (cfg.axis == "C") local.network.coupling_scale = v;
    if (cfg.axis == "N") local.network.neurons = static_cast<int>(std::lround(v));
    if (cfg.axis == "T") local.duration = v;
    if (cfg.axis == "esnr") local.esnr = v;
    const auto tr = static_cast<std::uint64_t>(trial);
    const auto model = build_random_network(local.network, derive_seed(cfg.seed, {1, tr}));
    const auto truth = simulate(model, bins_for(local.duration, model.delta()), derive_seed(cfg.seed, {2, tr}));
    check_hidden(local, model.neurons());
    std::optional<FluorescenceObservation> obs;
    if (cfg.axis == "esnr" || std::find(samplers.begin(), samplers.end(), SamplerKind::calcium) != samplers.end()) {
      ExperimentConfig oc = local;
      oc.fluorescence_file.clear();
      obs.emplace(observe_hidden(oc, truth, effective_calcium(local, model.delta()), derive_seed(cfg.seed, {4, tr})));
    }
    const auto start = without_hidden(truth, local.hidden);
    for (int k = 0; k < kinds; ++k) {
      SamplerConfig sc = local.sampler;
      sc.kind = samplers[k];
      const auto factory = make_factory(sc, observed_rate(truth, local.hidden), obs ? &*obs : nullptr);
      const auto res = run_chain(model, start, local.hidden, chain_config(sc, derive_seed(cfg.seed, {3, tr, static_cast<std::uint64_t>(k)})),
                                 factory.get(), obs ? &*obs : nullptr, {}, false);
      acc[(static_cast<std::size_t>(g) * kinds + k) * cfg.trials + trial] = res.stats.acceptance_rate();
    }
  });
  SweepTable table{cfg.axis, {}};
  for (int g = 0; g < values; ++g) {
    for (int k = 0; k < kinds; ++k) {
      SweepPoint p;
      p.value = cfg.grid[g];
      p.sampler = samplers[k];
      const auto* first = &acc[(static_cast<std::size_t>(g) * kinds + k) * cfg.trials];
      p.acceptance.assign(first, first + cfg.trials);
      const auto ms = mean_sd(p.acceptance);
      p.mean = ms.mean;
      p.sd = ms.sd;
      table.points.push_back(std::move(p));
    }
  }
  return table;
}

void write_sweep(const SweepTable& table, const fs::path& summary, const fs::path& trials) {
  Csv s({table.axis, "sampler", "mean", "sd"});
  Csv t({table.axis, "sampler", "trial", "acceptance"});
  for (const auto& p : table.points) {
    s.cell(p.value).cell(to_string(p.sampler)).cell(p.mean).cell(p.sd).end_row();
    for (std::size_t k = 0; k < p.acceptance.size(); ++k) {
      t.cell(p.value).cell(to_string(p.sampler)).cell(static_cast<long>(k)).cell(p.acceptance[k]).end_row();
    }
  }
  s.save(summary);
  t.save(trials);
}

void run_sweep_command(const ExperimentConfig& cfg) {
  Manifest m("sweep", cfg);
  const auto table = run_sweep(cfg);
  write_sweep(table, cfg.out / "sweep.csv", cfg.out / "trials.csv");
  m.output("sweep.csv", {cfg.axis, "sampler", "mean", "sd"}, "acceptance rate per grid value and sampler");
  m.output("trials.csv", {cfg.axis, "sampler", "trial", "acceptance"}, "per-trial acceptance rates");
  m.save(cfg.out);
}

// ---------------------------------------------------------------- reproduce

std::vector<std::string> figure_ids() {
  return {"rates", "acf", "marginals", "mh-sweep", "hybrid-sweep", "fluor-trace", "fluor-recursion", "fluor-samples",
          "esnr-sweep"};
}

namespace {

// Sizes of one reproduction. Desk values are the defaults; paper values are
// selected by --paper-scale; `scale` multiplies trials and sample counts.
struct Protocol {
  int trials;
  int samples;
  int burn_in;
};

Protocol scaled(Protocol desk, Protocol paper, const ExperimentConfig& cfg) {
  Protocol p = cfg.paper_scale ? paper : desk;
  const auto mul = [&](int v) { return std::max(1, static_cast<int>(std::lround(v * cfg.scale))); };
  p.trials = mul(p.trials);
  p.samples = mul(p.samples);
  p.burn_in = p.burn_in > 0 ? mul(p.burn_in) : 0;
  return p;
}

Json protocol_json(const Protocol& p, const Protocol& desk, const Protocol& paper) {
  return {{"used", {{"trials", p.trials}, {"samples", p.samples}, {"burn_in", p.burn_in}}},
          {"desk", {{"trials", desk.trials}, {"samples", desk.samples}, {"burn_in", desk.burn_in}}},
          {"paper", {{"trials", paper.trials}, {"samples", paper.samples}, {"burn_in", paper.burn_in}}}};
}

constexpr int kToyBlock = 250;      // bins per MH block on the short-kernel network
constexpr int kDefaultBlock = 1000;  // bins per MH block on the default network

std::vector<double> rate_series(const NetworkModel& model, const std::vector<double>& input) {
  std::vector<double> r(input.size());
  for (std::size_t t = 0; t < input.size(); ++t) {
    r[t] = spike_probability(model.nonlinearity(), input[t], model.delta()) / model.delta();
  }
  return r;
}

void reproduce_rates(const ExperimentConfig& cfg, Manifest& m) {
  auto net = NetworkGenConfig::toy();
  net.neurons = cfg.network.neurons;
  const auto model = build_random_network(net, derive_seed(cfg.seed, {1}));
  const int bins = bins_for(1.0, model.delta());
  const auto raster = simulate(model, bins, derive_seed(cfg.seed, {2}));
  const int i = cfg.hidden.front();
  check_hidden(cfg, model.neurons());
  const auto exact = exact_marginals(build_conditional_chain(model, i, raster), model.delta());
  const Block whole{0, bins};
  auto past = delayed_input(model, i, raster, whole);
  for (int t = 0; t < bins; ++t) past[t] += model.baseline(i, t);
  const auto delayed_rate = rate_series(model, past);
  const auto weak_rate = rate_series(model, weak_coupling_input(model, i, raster, whole));
  Csv csv({"bin", "exact_rate", "delayed_rate", "weakcoupling_rate"});
  for (int t = 0; t < bins; ++t) csv.cell(t).cell(exact[t]).cell(delayed_rate[t]).cell(weak_rate[t]).end_row();
  csv.save(cfg.out / "rates.csv");
  m.output("rates.csv", {"bin", "exact_rate", "delayed_rate", "weakcoupling_rate"},
           "exact posterior rate and the delayed-input and weak-coupling rate approximations (Hz)");
  Csv spikes({"bin"});
  for (int t = 0; t < bins; ++t) {
    if (raster.at(i, t)) spikes.cell(t).end_row();
  }
  spikes.save(cfg.out / "spikes.csv");
  m.output("spikes.csv", {"bin"}, "true spikes of the hidden neuron");
  m.j["axes"] = {{"x", "bin (2 ms)"}, {"y", "rate (Hz)"}};
}

struct ToyRun {
  SamplerKind kind;
  ChainOutcome outcome;
};

std::vector<ToyRun> toy_chains(const ExperimentConfig& cfg, double seconds, const Protocol& p, NetworkModel& model_out,
                               SpikeRaster& truth_out) {
  auto net = NetworkGenConfig::toy();
  net.neurons = cfg.network.neurons;
  model_out = build_random_network(net, derive_seed(cfg.seed, {1}));
  truth_out = simulate(model_out, bins_for(seconds, model_out.delta()), derive_seed(cfg.seed, {2}));
  check_hidden(cfg, model_out.neurons());
  const std::vector<int> hidden{cfg.hidden.front()};
  const auto start = without_hidden(truth_out, hidden);
  const std::vector<SamplerKind> kinds{SamplerKind::homogeneous, SamplerKind::delayed_input, SamplerKind::weak_coupling,
                                       SamplerKind::gibbs};
  std::vector<std::optional<ChainOutcome>> runs(kinds.size());
  parallel_for(static_cast<int>(kinds.size()), thread_count(), [&](int k) {
    SamplerConfig sc = cfg.sampler;
    sc.kind = kinds[k];
    sc.block_length = kToyBlock;
    sc.samples = p.samples;
    sc.burn_in = p.burn_in;
    runs[k] = run_configured_chain(model_out, start, hidden, sc, derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(k)}),
                                   cfg.acf_lags, nullptr);
  });
  std::vector<ToyRun> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) out.push_back({kinds[k], std::move(*runs[k])});
  return out;
}

void reproduce_acf(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{1, 5000, 1000}, paper{1, 5000, 1000};
  const auto p = scaled(desk, paper, cfg);
  m.j["protocol"] = protocol_json(p, desk, paper);
  NetworkModel model(1, 1.0, {{0.0}}, {}, Nonlinearity::exponential());
  SpikeRaster truth;
  const auto runs = toy_chains(cfg, 10.0, p, model, truth);
  std::vector<std::string> header{"lag"};
  for (const auto& r : runs) header.push_back(to_string(r.kind));
  Csv csv(header);
  std::size_t lags = 0;
  for (const auto& r : runs) lags = std::max(lags, r.outcome.acf[0].size());
  for (std::size_t l = 0; l < lags; ++l) {
    csv.cell(static_cast<long>(l));
    for (const auto& r : runs) csv.cell(l < r.outcome.acf[0].size() ? format_double(r.outcome.acf[0][l]) : "");
    csv.end_row();
  }
  csv.save(cfg.out / "acf.csv");
  m.output("acf.csv", header, "autocorrelation of per-bin samples averaged over bins, per sampler");
  Csv summary({"sampler", "acceptance", "iat"});
  for (const auto& r : runs) {
    const double iat = r.outcome.acf[0].empty() ? std::nan("") : integrated_autocorrelation_time(r.outcome.acf[0]);
    summary.cell(to_string(r.kind))
        .cell(r.kind == SamplerKind::gibbs ? 1.0 : r.outcome.result.stats.acceptance_rate())
        .cell(iat)
        .end_row();
  }
  summary.save(cfg.out / "summary.csv");
  m.output("summary.csv", {"sampler", "acceptance", "iat"}, "acceptance rate and integrated autocorrelation time");
  m.j["axes"] = {{"x", "lag (samples)"}, {"y", "autocorrelation"}};
}

void reproduce_marginals(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{1, 5000, 1000}, paper{1, 5000, 1000};
  const auto p = scaled(desk, paper, cfg);
  m.j["protocol"] = protocol_json(p, desk, paper);
  NetworkModel model(1, 1.0, {{0.0}}, {}, Nonlinearity::exponential());
  SpikeRaster truth;
  const auto runs = toy_chains(cfg, 1.0, p, model, truth);
  const int i = cfg.hidden.front();
  const auto exact = exact_marginals(build_conditional_chain(model, i, truth), model.delta());
  std::vector<std::string> header{"bin", "spike", "exact"};
  for (const auto& r : runs) header.push_back(to_string(r.kind));
  Csv csv(header);
  for (int t = 0; t < truth.bins(); ++t) {
    csv.cell(t).cell(static_cast<int>(truth.at(i, t))).cell(exact[t]);
    for (const auto& r : runs) csv.cell(r.outcome.rates[0][t]);
    csv.end_row();
  }
  csv.save(cfg.out / "marginals.csv");
  m.output("marginals.csv", header, "posterior rate (Hz): exact and estimated by each sampler");
  Csv summary({"sampler", "acceptance", "rmse"});
  for (const auto& r : runs) {
    double se = 0.0;
    for (int t = 0; t < truth.bins(); ++t) se += std::pow(r.outcome.rates[0][t] - exact[t], 2);
    summary.cell(to_string(r.kind))
        .cell(r.kind == SamplerKind::gibbs ? 1.0 : r.outcome.result.stats.acceptance_rate())
        .cell(std::sqrt(se / truth.bins()))
        .end_row();
  }
  summary.save(cfg.out / "summary.csv");
  m.output("summary.csv", {"sampler", "acceptance", "rmse"}, "acceptance and RMS error of the estimated rate (Hz)");
  m.j["axes"] = {{"x", "bin (2 ms)"}, {"y", "rate (Hz)"}};
}

void sweep_into(const ExperimentConfig& base, const std::string& axis, std::vector<double> grid,
                std::vector<SamplerKind> samplers, const Protocol& p, double duration, const std::string& stem,
                Manifest& m) {
  ExperimentConfig c = base;
  c.axis = axis;
  c.grid = std::move(grid);
  c.samplers = std::move(samplers);
  c.trials = p.trials;
  c.sampler.samples = p.samples;
  c.sampler.burn_in = p.burn_in;
  if (c.sampler.block_length < 0) c.sampler.block_length = kDefaultBlock;
  c.duration = duration;
  const auto table = run_sweep(c);
  write_sweep(table, c.out / (stem + ".csv"), c.out / (stem + "_trials.csv"));
  m.output(stem + ".csv", {axis, "sampler", "mean", "sd"}, "mean and s.d. of acceptance over trials");
  m.output(stem + "_trials.csv", {axis, "sampler", "trial", "acceptance"}, "per-trial acceptance");
}

void reproduce_mh_sweep(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{16, 200, 20}, paper{64, 500, 50};
  const auto p = scaled(desk, paper, cfg);
  Protocol pt = p;
  pt.trials = std::max(1, p.trials / 4);
  m.j["protocol"] = protocol_json(p, desk, paper);
  m.j["protocol_T"] = protocol_json(pt, desk, paper);
  const std::vector<SamplerKind> weak{SamplerKind::weak_coupling};
  std::vector<double> ngrid{50, 100, 200, 400};
  if (cfg.paper_scale) ngrid.push_back(800);
  sweep_into(cfg, "C", {1, 2, 4, 8}, weak, p, 10.0, "sweep_C", m);
  sweep_into(cfg, "N", ngrid, weak, p, 10.0, "sweep_N", m);
  sweep_into(cfg, "T", {10, 40, 160}, weak, pt, 10.0, "sweep_T", m);
  m.j["axes"] = {{"C", "coupling scale"}, {"N", "neurons"}, {"T", "train length (s)"}, {"y", "acceptance rate"}};
}

void reproduce_hybrid_sweep(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{16, 200, 20}, paper{64, 500, 50};
  const auto p = scaled(desk, paper, cfg);
  m.j["protocol"] = protocol_json(p, desk, paper);
  const std::vector<SamplerKind> all{SamplerKind::weak_coupling, SamplerKind::hybrid, SamplerKind::truncated_only,
                                     SamplerKind::weak_cross};
  std::vector<double> ngrid{50, 100, 200, 400};
  if (cfg.paper_scale) ngrid.push_back(800);
  sweep_into(cfg, "C", {1, 2, 4, 8}, all, p, 10.0, "sweep_C", m);
  sweep_into(cfg, "N", ngrid, {SamplerKind::weak_coupling, SamplerKind::hybrid}, p, 10.0, "sweep_N", m);
  m.j["axes"] = {{"C", "coupling scale"}, {"N", "neurons"}, {"y", "acceptance rate"}};
}

struct CalciumInstance {
  NetworkModel model;
  SpikeRaster truth;
  CalciumModel cal;
  CalciumSimulation sim;
};

CalciumInstance calcium_instance(const ExperimentConfig& cfg, const std::string& preset, std::uint64_t salt) {
  auto model = build_random_network(cfg.network, derive_seed(cfg.seed, {1}));
  auto truth = simulate(model, bins_for(10.0, model.delta()), derive_seed(cfg.seed, {2}));
  check_hidden(cfg, model.neurons());
  auto cal = calcium_preset(preset);
  auto sim = simulate_calcium(truth.row(cfg.hidden.front()), cal, model.delta(), derive_seed(cfg.seed, {4, salt}));
  return {std::move(model), std::move(truth), cal, std::move(sim)};
}

void reproduce_fluor_trace(const ExperimentConfig& cfg, Manifest& m) {
  const auto lo = calcium_instance(cfg, "esnr2", 0);
  const auto hi = calcium_instance(cfg, "esnr5", 0);
  Csv csv({"frame", "bin", "f_esnr2", "f_esnr5"});
  for (std::size_t k = 0; k < lo.sim.trace.size(); ++k) {
    csv.cell(static_cast<long>(k)).cell(lo.sim.trace.bins[k]).cell(lo.sim.trace.values[k]).cell(hi.sim.trace.values[k]).end_row();
  }
  csv.save(cfg.out / "fluorescence.csv");
  m.output("fluorescence.csv", {"frame", "bin", "f_esnr2", "f_esnr5"}, "fluorescence of the hidden neuron, both presets");
  Csv spikes({"bin"});
  const int i = cfg.hidden.front();
  for (int t = 0; t < lo.truth.bins(); ++t) {
    if (lo.truth.at(i, t)) spikes.cell(t).end_row();
  }
  spikes.save(cfg.out / "spikes.csv");
  m.output("spikes.csv", {"bin"}, "true spikes of the hidden neuron");
  const auto e2 = effective_snr(lo.cal, cfg.network.target_rate, lo.model.delta());
  const auto e5 = effective_snr(hi.cal, cfg.network.target_rate, hi.model.delta());
  m.j["esnr"] = {{"esnr2", {{"per_bin", e2.per_bin}, {"per_frame", e2.per_frame}}},
                 {"esnr5", {{"per_bin", e5.per_bin}, {"per_frame", e5.per_frame}}}};
  m.j["axes"] = {{"x", "bin (2 ms)"}, {"y", "fluorescence"}};
}

std::uint32_t state_after(std::span<const std::uint8_t> row, int t, int order) {
  std::uint32_t s = 0;
  for (int l = 0; l < order; ++l) {
    if (t - l >= 0 && row[t - l]) s |= 1u << l;
  }
  return s;
}

void reproduce_fluor_recursion(const ExperimentConfig& cfg, Manifest& m) {
  const auto inst = calcium_instance(cfg, "esnr5", 0);
  const int i = cfg.hidden.front();
  const int bins = bins_for(1.0, inst.model.delta());
  CalciumConfig cc;
  cc.model = inst.cal;
  cc.chain = cfg.sampler.hybrid;
  cc.mixture = cfg.sampler.mixture;
  const auto start = without_hidden(inst.truth, std::vector<int>{i});
  CalciumProposal proposal(inst.model, i, start, Block{0, inst.truth.bins()}, inst.sim.trace, cc);
  const auto& mix = proposal.mixture();
  int order = 0;
  while ((1u << order) < mix.num_states()) ++order;
  const auto row = inst.truth.row(i);
  double cmax = 0.0;
  for (int t = 0; t < bins; ++t) cmax = std::max(cmax, inst.sim.calcium[t]);
  cmax *= 1.5;
  const int grid = 120;
  Csv csv({"bin", "calcium", "log_density", "density"});
  for (int t = 0; t < bins; ++t) {
    const auto s = state_after(row, t, order);
    std::vector<double> ld(grid);
    double top = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
      ld[g] = mix.log_density(t, s, cmax * (g + 0.5) / grid);
      top = std::max(top, ld[g]);
    }
    for (int g = 0; g < grid; ++g) {
      csv.cell(t).cell(cmax * (g + 0.5) / grid).cell(ld[g]).cell(std::isfinite(top) ? std::exp(ld[g] - top) : 0.0).end_row();
    }
  }
  csv.save(cfg.out / "recursion.csv");
  m.output("recursion.csv", {"bin", "calcium", "log_density", "density"},
           "backward density of future fluorescence given calcium, at the true spiking state; density is scaled "
           "to a maximum of one per bin");
  Csv truth({"bin", "spike", "calcium", "observed_calcium"});
  std::size_t k = 0;
  for (int t = 0; t < bins; ++t) {
    truth.cell(t).cell(static_cast<int>(row[t])).cell(inst.sim.calcium[t]);
    if (k < inst.sim.trace.size() && inst.sim.trace.bins[k] == t) {
      truth.cell(moment_match_observation(inst.sim.trace.values[k], inst.cal).mean);
      ++k;
    } else {
      truth.cell(std::string());
    }
    truth.end_row();
  }
  truth.save(cfg.out / "truth.csv");
  m.output("truth.csv", {"bin", "spike", "calcium", "observed_calcium"},
           "true spikes and calcium; inverse-saturated fluorescence at frame bins");
  m.j["axes"] = {{"x", "bin (2 ms)"}, {"y", "calcium"}};
}

void reproduce_fluor_samples(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{1, 500, 100}, paper{1, 5000, 1000};
  const auto p = scaled(desk, paper, cfg);
  m.j["protocol"] = protocol_json(p, desk, paper);
  const int i = cfg.hidden.front();
  const std::vector<int> hidden{i};
  const std::vector<std::string> presets{"esnr5", "esnr2"};
  std::vector<std::optional<ChainOutcome>> runs(presets.size());
  std::vector<std::optional<CalciumInstance>> insts(presets.size());
  parallel_for(static_cast<int>(presets.size()), thread_count(), [&](int k) {
    insts[k] = calcium_instance(cfg, presets[k], 0);
    FluorescenceObservation obs(insts[k]->model.neurons(), insts[k]->cal, insts[k]->model.delta());
    obs.set_trace(i, insts[k]->sim.trace);
    SamplerConfig sc = cfg.sampler;
    sc.kind = SamplerKind::calcium;
    sc.samples = p.samples;
    sc.burn_in = p.burn_in;
    runs[k] = run_configured_chain(insts[k]->model, without_hidden(insts[k]->truth, hidden), hidden, sc,
                                   derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(k)}), cfg.acf_lags, &obs);
  });
  Csv csv({"bin", "spike", "rate_esnr5", "rate_esnr2"});
  const auto& truth = insts[0]->truth;
  for (int t = 0; t < truth.bins(); ++t) {
    csv.cell(t).cell(static_cast<int>(truth.at(i, t))).cell(runs[0]->rates[0][t]).cell(runs[1]->rates[0][t]).end_row();
  }
  csv.save(cfg.out / "posterior.csv");
  m.output("posterior.csv", {"bin", "spike", "rate_esnr5", "rate_esnr2"}, "posterior spiking rate (Hz) given fluorescence");
  Csv summary({"preset", "acceptance"});
  for (std::size_t k = 0; k < presets.size(); ++k) {
    summary.cell(presets[k]).cell(runs[k]->result.stats.acceptance_rate()).end_row();
  }
  summary.save(cfg.out / "summary.csv");
  m.output("summary.csv", {"preset", "acceptance"}, "MH acceptance rate per preset");
  m.j["axes"] = {{"x", "bin (2 ms)"}, {"y", "rate (Hz)"}};
}

void reproduce_esnr_sweep(const ExperimentConfig& cfg, Manifest& m) {
  const Protocol desk{8, 50, 10}, paper{50, 500, 50};
  const auto p = scaled(desk, paper, cfg);
  m.j["protocol"] = protocol_json(p, desk, paper);
  const std::vector<double> grid{1, 1.5, 2, 3, 5, 8};
  std::vector<SweepTable> tables;
  for (const char* preset : {"hill", "linear"}) {
    ExperimentConfig c = cfg;
    c.calcium = calcium_preset(preset);
    c.calcium_preset = preset;
    c.axis = "esnr";
    c.grid = grid;
    c.samplers = {SamplerKind::calcium};
    c.trials = p.trials;
    c.sampler.samples = p.samples;
    c.sampler.burn_in = p.burn_in;
    c.duration = 10.0;
    tables.push_back(run_sweep(c));
    write_sweep(tables.back(), c.out / (std::string("sweep_") + preset + ".csv"),
                c.out / (std::string("sweep_") + preset + "_trials.csv"));
    m.output(std::string("sweep_") + preset + ".csv", {"esnr", "sampler", "mean", "sd"}, std::string(preset) + " saturation");
    m.output(std::string("sweep_") + preset + "_trials.csv", {"esnr", "sampler", "trial", "acceptance"},
             std::string(preset) + " saturation, per trial");
  }
  Csv csv({"esnr", "R_hill", "R_linear"});
  for (std::size_t g = 0; g < grid.size(); ++g) csv.cell(grid[g]).cell(tables[0].points[g].mean).cell(tables[1].points[g].mean).end_row();
  csv.save(cfg.out / "esnr_sweep.csv");
  m.output("esnr_sweep.csv", {"esnr", "R_hill", "R_linear"}, "mean acceptance rate against per-bin eSNR");
  m.j["axes"] = {{"x", "eSNR (per bin)"}, {"y", "acceptance rate"}};
}

}  // namespace

void run_reproduce(const ExperimentConfig& cfg) {
  const auto ids = figure_ids();
  if (std::find(ids.begin(), ids.end(), cfg.figure) == ids.end()) {
    throw ConfigError("unknown figure id '" + cfg.figure + "'");
  }
  Manifest m("reproduce", cfg);
  m.j["figure"] = cfg.figure;
  m.j["scale"] = cfg.scale;
  m.j["paper_scale"] = cfg.paper_scale;
  if (cfg.scale == 0.0) {
    m.j["note"] = "scale 0: configuration echo only";
    m.save(cfg.out);
    return;
  }
  if (cfg.figure == "rates") reproduce_rates(cfg, m);
  if (cfg.figure == "acf") reproduce_acf(cfg, m);
  if (cfg.figure == "marginals") reproduce_marginals(cfg, m);
  if (cfg.figure == "mh-sweep") reproduce_mh_sweep(cfg, m);
  if (cfg.figure == "hybrid-sweep") reproduce_hybrid_sweep(cfg, m);
  if (cfg.figure == "fluor-trace") reproduce_fluor_trace(cfg, m);
  if (cfg.figure == "fluor-recursion") reproduce_fluor_recursion(cfg, m);
  if (cfg.figure == "fluor-samples") reproduce_fluor_samples(cfg, m);
  if (cfg.figure == "esnr-sweep") reproduce_esnr_sweep(cfg, m);
  m.save(cfg.out);
}

}  // namespace spikesamp
