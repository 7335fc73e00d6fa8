#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikesamp/calcium.hpp"
#include "spikesamp/hybrid.hpp"
#include "spikesamp/io.hpp"
#include "spikesamp/mh.hpp"

namespace spikesamp {

inline constexpr int kCalciumBlock = 1000;

enum class SamplerKind {
  homogeneous,
  delayed_input,
  weak_coupling,
  hybrid,
  truncated_only,
  weak_cross,
  exact,
  gibbs,
  calcium,
};

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::weak_coupling;
  // Bins per MH block; 0 = whole train, -1 = kCalciumBlock for the calcium
  // sampler and the whole train otherwise.
  int block_length = -1;
  int burn_in = 1000;
  int samples = 5000;
  JointForm form = JointForm::bernoulli;
  bool random_scan = false;
  bool initialize_from_proposal = true;
  // Homogeneous proposal rate in Hz; 0 uses the observed neurons' mean rate.
  double homogeneous_rate = 0.0;
  HybridConfig hybrid;
  MixtureOptions mixture;
};

SamplerConfig sampler_from_json(const Json& j, SamplerConfig base = {});
Json sampler_to_json(const SamplerConfig& cfg);

// Everything a CLI run needs. Missing JSON keys keep these defaults.
struct ExperimentConfig {
  std::string command = "sample";
  NetworkGenConfig network;
  std::string network_file;       // overrides the generator when set
  std::string raster_file;        // observed raster; simulated when empty
  std::string fluorescence_file;  // trace of hidden[0]; simulated when empty
  double duration = 10.0;         // seconds
  std::vector<int> hidden{0};
  SamplerConfig sampler;
  CalciumModel calcium;
  std::string calcium_preset;  // name of the preset `calcium` was taken from
  double esnr = 0.0;           // > 0: rescale the calcium noise to this per-bin eSNR
  int acf_lags = 100;
  // Sweeps.
  std::string axis = "C";  // C | N | T | esnr
  std::vector<double> grid;
  std::vector<SamplerKind> samplers;  // empty: just `sampler.kind`
  int trials = 16;
  // reproduce
  std::string figure;
  double scale = 1.0;
  bool paper_scale = false;

  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
};

ExperimentConfig experiment_from_json(const Json& j, ExperimentConfig base = {});
Json experiment_to_json(const ExperimentConfig& cfg);

// Worker threads from SPIKESAMP_THREADS (default 1).
int thread_count();

// Runs body(k) for k in [0, n) on `threads` workers; the first exception is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

// Named calcium settings: "esnr2", "esnr5" (Hill) and "linear" (linear S, noise set per eSNR).
CalciumModel calcium_preset(const std::string& name);
std::vector<std::string> calcium_preset_names();

// Noise scaled so the per-bin eSNR at `rate` matches `target`.
CalciumModel calibrate_noise(const CalciumModel& cal, double target, double rate, double delta,
                             std::uint64_t seed = 1);

// Proposal factory for a sampler; null for pointwise Gibbs. `rate` feeds the
// homogeneous proposal, `obs` the calcium proposal.
std::unique_ptr<ProposalFactory> make_factory(const SamplerConfig& cfg, double rate,
                                              const FluorescenceObservation* obs = nullptr);
ChainConfig chain_config(const SamplerConfig& cfg, std::uint64_t seed);

// Mean firing rate (Hz) of the neurons not in `hidden`.
double observed_rate(const SpikeRaster& raster, std::span<const int> hidden);

struct SweepPoint {
  double value = 0.0;
  SamplerKind sampler = SamplerKind::weak_coupling;
  std::vector<double> acceptance;  // per trial
  double mean = 0.0;
  double sd = 0.0;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepPoint> points;
};

// One chain per (grid value, sampler, trial). Trial k uses the same network
// seed at every grid value and for every sampler.
SweepTable run_sweep(const ExperimentConfig& cfg);

// Columns: value,sampler,mean,sd and value,sampler,trial,acceptance.
void write_sweep(const SweepTable& table, const std::filesystem::path& summary, const std::filesystem::path& trials);

// Subcommands. Each writes its outputs and a manifest.json into cfg.out.
void run_simulate(const ExperimentConfig& cfg);
void run_sample(const ExperimentConfig& cfg);
void run_infer_calcium(const ExperimentConfig& cfg);
void run_sweep_command(const ExperimentConfig& cfg);
void run_reproduce(const ExperimentConfig& cfg);

std::vector<std::string> figure_ids();

}  // namespace spikesamp
