#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spikesamp/exact_hmm.hpp"
#include "spikesamp/hybrid.hpp"
#include "spikesamp/mh.hpp"

namespace spikesamp {

enum class Saturation { linear, hill };

// C(t) = C(t-Δ) - (Δ/τ)(C(t-Δ) - C_b) + A n(t),  F ~ N(S(C), V(C)),
// V(C) = noise_slope * S(C) + noise_floor.
struct CalciumModel {
  double tau = 0.5;         // seconds
  double amplitude = 1.0;   // jump per spike
  double baseline = 0.1;    // C_b
  Saturation saturation = Saturation::hill;
  double kd = 1.0;          // Hill dissociation constant
  double gain = 1.0;        // linear S(C) = gain * C + offset
  double offset = 0.0;
  double noise_slope = 0.0;
  double noise_floor = 1e-3;
  double frame_rate = 50.0;        // Hz
  double gibbs_time_constants = 5.0;

  double saturate(double c) const;
  double saturate_slope(double c) const;
  double variance(double c) const;
  // Decay fraction Δ/τ of one bin.
  double decay(double delta) const { return delta / tau; }
  // Bins per frame, round(1 / (FR Δ)).
  int frame_spacing(double delta) const;

  void validate(double delta) const;
  // Same model with both noise parameters scaled so the noise s.d. scales by `factor`.
  CalciumModel with_noise_scale(double factor) const;
};

// Observed frames; bins[k] is the bin at which frame k was taken.
struct FluorescenceTrace {
  std::vector<int> bins;
  std::vector<double> values;
  std::size_t size() const { return bins.size(); }
};

// Frames sit at the last bin of each frame interval.
std::vector<int> frame_bins(int bins, int spacing);

// Deterministic calcium path of a train, starting from C_b before bin 0.
std::vector<double> calcium_path(const CalciumModel& cal, std::span<const std::uint8_t> train, double delta);

struct CalciumSimulation {
  std::vector<double> calcium;
  FluorescenceTrace trace;
};

CalciumSimulation simulate_calcium(std::span<const std::uint8_t> train, const CalciumModel& cal, double delta,
                                   std::uint64_t seed);

// Exact log P(F | train) restricted to frames at bins [from, to).
double fluorescence_log_likelihood(const CalciumModel& cal, const FluorescenceTrace& trace,
                                   std::span<const std::uint8_t> train, double delta, int from = 0,
                                   int to = -1);

struct EffectiveSnr {
  double per_bin = 0.0;    // increments over one bin
  double per_frame = 0.0;  // increments over one frame interval
};

// Empirical eSNR from a long simulated trace of a Bernoulli train at `rate`.
// Both levels use the same simulated calcium and noise draws.
EffectiveSnr effective_snr(const CalciumModel& cal, double rate, double delta, int bins = 100000,
                           std::uint64_t seed = 1);

// Gaussian in C approximating P(F | C) = kappa * N(C; mean, var).
struct ObservationGaussian {
  double mean = 0.0;
  double var = 1.0;
  double log_kappa = 0.0;
};

inline constexpr double kHillClamp = 1e-6;

ObservationGaussian moment_match_observation(double f, const CalciumModel& cal);

struct MixtureComponent {
  double log_weight = 0.0;
  double mean = 0.0;
  double var = 1.0;
  int spikes = 0;  // future spike count index k
};

// Shift of a component through one bin of calcium dynamics (density in C(t)
// given the density in C(t+Δ) and the spike n(t+Δ)).
MixtureComponent shift_component(const MixtureComponent& c, double decay, double baseline, double amplitude,
                                 bool spike);
// Product with an observation Gaussian; the weight picks up the normalizer.
MixtureComponent observe_component(const MixtureComponent& c, const ObservationGaussian& obs);
// Product with the frame likelihood N(f; S(C), V(C)), with S and V linearized
// at the product's mean by `iterations` Gauss-Newton steps (exact for linear S
// and constant V). The weight picks up the normalizer.
MixtureComponent observe_frame(const MixtureComponent& c, double f, const CalciumModel& cal, int iterations);
// Moment-matched single Gaussian of two weighted components.
MixtureComponent merge_components(const MixtureComponent& a, const MixtureComponent& b);

struct MixtureOptions {
  double prune_nats = 30.0;
  int max_components = 128;
  // Linearization steps per frame for Hill saturation; 0 linearizes once at
  // the inverse of F, independent of the component.
  int hill_iterations = 3;
};

// log P(F at frames >= t | s(t), C(t)) as a Gaussian mixture in C(t), for
// every bin t of a spiking chain's window and every state. Bins past the
// window carry the raster's spikes of the state neuron.
class BackwardMixture {
 public:
  // `transition(t, s)` is the probability of a spike at t from state s.
  BackwardMixture(const ConditionalChain& chain, const BackwardFilter& filter, const CalciumModel& cal,
                  const FluorescenceTrace& trace, std::span<const std::uint8_t> row, double delta,
                  const MixtureOptions& options = {});

  int begin() const { return begin_; }
  int end() const { return end_; }
  std::uint32_t num_states() const { return states_; }
  // True when no frame lies at or after bin t (the density is identically one).
  bool flat(int t) const { return flat_[t - begin_]; }
  std::span<const MixtureComponent> components(int t, std::uint32_t s) const;
  double log_density(int t, std::uint32_t s, double c) const;
  std::size_t total_components() const { return comps_.size(); }

 private:
  int begin_, end_;
  std::uint32_t states_;
  std::vector<std::size_t> offsets_;
  std::vector<MixtureComponent> comps_;
  std::vector<std::uint8_t> flat_;
};

struct CalciumConfig {
  CalciumModel model;
  HybridConfig chain;
  MixtureOptions mixture;
};

// Fluorescence-conditioned proposal for one block of neuron i.
class CalciumProposal : public BlockProposal {
 public:
  CalciumProposal(const NetworkModel& model, int i, const SpikeRaster& raster, Block block,
                  const FluorescenceTrace& trace, const CalciumConfig& cfg);

  ProposalTrace sample(Rng& rng) override;
  double log_q(std::span<const std::uint8_t> train) override;
  std::size_t memory_bytes() const override;

  const BackwardMixture& mixture() const { return *mixture_; }
  // Calcium path of the last sample over the block.
  const std::vector<double>& last_calcium() const { return last_calcium_; }

 private:
  template <typename Choose>
  double run(Choose&& choose);

  Block block_;
  double delta_;
  CalciumModel cal_;
  double start_calcium_;
  std::vector<std::uint8_t> forced_tail_;
  ChainProposal spiking_;
  std::unique_ptr<BackwardMixture> mixture_;
  std::vector<double> last_calcium_;
};

// Fluorescence traces attached to hidden neurons, as an MH observation.
class FluorescenceObservation : public SpikeObservation {
 public:
  FluorescenceObservation(int neurons, CalciumModel cal, double delta);
  void set_trace(int i, FluorescenceTrace trace);
  const FluorescenceTrace* trace(int i) const;
  const CalciumModel& model() const { return cal_; }

  bool observes(int i) const override;
  double log_likelihood(int i, std::span<const std::uint8_t> row, int from, int to) const override;
  int gibbs_window() const override;

 private:
  CalciumModel cal_;
  double delta_;
  std::vector<std::optional<FluorescenceTrace>> traces_;
};

class CalciumProposalFactory : public ProposalFactory {
 public:
  CalciumProposalFactory(CalciumConfig cfg, const FluorescenceObservation& obs) : cfg_(cfg), obs_(&obs) {}
  std::unique_ptr<BlockProposal> make(const NetworkModel& model, int i, const SpikeRaster& raster,
                                      Block block) const override;
  std::vector<std::uint8_t> context_key(const NetworkModel& model, int i, const SpikeRaster& raster,
                                        Block block) const override;

 private:
  CalciumConfig cfg_;
  const FluorescenceObservation* obs_;
};

struct FluorProposalResult {
  ProposalTrace trace;
  std::vector<double> calcium;
};

FluorProposalResult fluor_proposal_sample(const NetworkModel& model, int i, const SpikeRaster& raster,
                                          const FluorescenceTrace& trace, const CalciumConfig& cfg, Block block,
                                          std::uint64_t seed);

BlockUpdate fluor_mh_update(const NetworkModel& model, int i, SpikeRaster& raster, const FluorescenceTrace& trace,
                            const CalciumConfig& cfg, Block block, std::uint64_t seed,
                            JointForm form = JointForm::bernoulli);

}  // namespace spikesamp
