#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spikesamp/errors.hpp"
#include "spikesamp/experiments.hpp"

using namespace spikesamp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("spikesamp_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.network.neurons = 10;
  c.network.pilot_duration = 1.0;
  c.duration = 1.0;
  c.axis = "C";
  c.grid = {1.0, 4.0};
  c.samplers = {SamplerKind::weak_coupling, SamplerKind::hybrid};
  c.trials = 3;
  c.sampler.samples = 10;
  c.sampler.burn_in = 2;
  c.sampler.block_length = 250;
  return c;
}

}  // namespace

TEST(Experiments, ConfigRoundTrip) {
  ExperimentConfig c = small_sweep();
  c.sampler.kind = SamplerKind::truncated_only;
  c.hidden = {0, 3};
  c.seed = 99;
  const auto back = experiment_from_json(Json::parse(experiment_to_json(c).dump()));
  EXPECT_EQ(experiment_to_json(back), experiment_to_json(c));
  EXPECT_EQ(back.sampler.kind, SamplerKind::truncated_only);
  EXPECT_EQ(back.hidden, c.hidden);
}

TEST(Experiments, ConfigErrors) {
  EXPECT_THROW(experiment_from_json(Json{{"axis", "Q"}}), ConfigError);
  EXPECT_THROW(experiment_from_json(Json{{"sampler", {{"kind", "magic"}}}}), ConfigError);
  EXPECT_THROW(experiment_from_json(Json{{"duration", -1}}), ConfigError);
  EXPECT_THROW(experiment_from_json(Json{{"calcium", "esnr9"}}), ConfigError);
  EXPECT_THROW(experiment_from_json(Json{{"trials", "many"}}), ConfigError);
}

TEST(Experiments, ParallelForCoversEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](int k) { hits[k]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](int k) { if (k == 5) throw NumericalError("x"); }), NumericalError);
}

TEST(Experiments, SweepIndependentOfThreadCount) {
  const auto cfg = small_sweep();
  setenv("SPIKESAMP_THREADS", "1", 1);
  const auto a = run_sweep(cfg);
  setenv("SPIKESAMP_THREADS", "3", 1);
  const auto b = run_sweep(cfg);
  unsetenv("SPIKESAMP_THREADS");
  ASSERT_EQ(a.points.size(), 4u);
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    EXPECT_EQ(a.points[k].acceptance, b.points[k].acceptance);
    EXPECT_EQ(a.points[k].acceptance.size(), 3u);
  }
}

TEST(Experiments, ThreadCountValidation) {
  setenv("SPIKESAMP_THREADS", "zero", 1);
  EXPECT_THROW(thread_count(), ConfigError);
  setenv("SPIKESAMP_THREADS", "2", 1);
  EXPECT_EQ(thread_count(), 2);
  unsetenv("SPIKESAMP_THREADS");
  EXPECT_EQ(thread_count(), 1);
}

TEST(Experiments, CalibratedNoiseHitsTarget) {
  const auto cal = calcium_preset("esnr5");
  EXPECT_NEAR(effective_snr(cal, 5.0, 0.002, 1000000).per_bin, 5.0, 1e-6);
  const auto lo = calibrate_noise(cal, 2.0, 5.0, 0.002);
  EXPECT_NEAR(effective_snr(lo, 5.0, 0.002, 1000000).per_bin, 2.0, 1e-6);
}

TEST(Experiments, ShippedPresetFilesMatchBuiltins) {
  for (const auto& name : calcium_preset_names()) {
    const auto file = fs::path(SPIKESAMP_SOURCE_DIR) / "configs" / "calcium" / (name + ".json");
    ASSERT_TRUE(fs::exists(file)) << file;
    const auto shipped = experiment_from_json(read_json_file(file));
    EXPECT_EQ(calcium_to_json(shipped.calcium), calcium_to_json(calcium_preset(name))) << name;
  }
}

TEST(Experiments, ReproduceScaleZeroEchoesConfig) {
  ExperimentConfig c;
  c.figure = "mh-sweep";
  c.scale = 0.0;
  c.out = scratch("echo");
  run_reproduce(c);
  const auto m = read_json_file(c.out / "manifest.json");
  EXPECT_EQ(m.at("figure"), "mh-sweep");
  EXPECT_EQ(m.at("outputs").size(), 0u);
  EXPECT_EQ(std::distance(fs::directory_iterator(c.out), fs::directory_iterator{}), 1);
  c.figure = "nope";
  EXPECT_THROW(run_reproduce(c), ConfigError);
}

TEST(Experiments, RatesFigureSchema) {
  ExperimentConfig c;
  c.figure = "rates";
  c.out = scratch("rates");
  run_reproduce(c);
  const auto text = slurp(c.out / "rates.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "bin,exact_rate,delayed_rate,weakcoupling_rate");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 501);
}

TEST(Experiments, SampleCommandIsReproducible) {
  ExperimentConfig c;
  c.network.neurons = 10;
  c.network.pilot_duration = 1.0;
  c.duration = 1.0;
  c.sampler.samples = 20;
  c.sampler.burn_in = 2;
  c.hidden = {0, 1};
  c.out = scratch("sample_a");
  run_sample(c);
  ExperimentConfig d = c;
  d.out = scratch("sample_b");
  run_sample(d);
  for (const char* f : {"samples.csv", "marginals_0.csv", "marginals_1.csv", "acf.csv"}) {
    EXPECT_EQ(slurp(c.out / f), slurp(d.out / f)) << f;
  }
  EXPECT_EQ(slurp(c.out / "samples.csv").substr(0, 18), "sample,neuron,bin\n");
}

TEST(Experiments, HiddenNeuronOutOfRange) {
  ExperimentConfig c;
  c.network.neurons = 5;
  c.network.pilot_duration = 1.0;
  c.duration = 0.2;
  c.hidden = {7};
  c.out = scratch("range");
  EXPECT_THROW(run_sample(c), ConfigError);
}
