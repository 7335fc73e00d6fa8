#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "spikesamp/network.hpp"

using namespace spikesamp;

TEST(Nonlinearity, ProbabilityClampAndHardInput) {
  const auto f = Nonlinearity::exponential();
  bool clamped = false;
  EXPECT_DOUBLE_EQ(spike_probability(f, std::log(10.0), 0.01, &clamped), 0.1);
  EXPECT_FALSE(clamped);
  EXPECT_EQ(spike_probability(f, 20.0, 0.01, &clamped), kMaxSpikeProbability);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(spike_probability(f, kRefractoryWeight, 0.01), 0.0);
  EXPECT_EQ(spike_log_mass(f, kRefractoryWeight, 0.01, true), -INFINITY);
  EXPECT_EQ(spike_log_mass(f, kRefractoryWeight, 0.01, false), 0.0);
}

TEST(Nonlinearity, LogMassForms) {
  const auto f = Nonlinearity::exponential();
  const double j = 2.5, d = 0.002;
  const double p = std::exp(j) * d;
  EXPECT_NEAR(spike_log_mass(f, j, d, true), std::log(p), 1e-14);
  EXPECT_NEAR(spike_log_mass(f, j, d, false), std::log1p(-p), 1e-14);
  EXPECT_NEAR(spike_log_mass(f, j, d, true, JointForm::poisson), std::log(p) - p, 1e-14);
  EXPECT_NEAR(spike_log_mass(f, j, d, false, JointForm::poisson), -p, 1e-14);
}

TEST(Nonlinearity, SoftplusDerivativeMatchesFiniteDifference) {
  const auto f = Nonlinearity::softplus();
  for (double j : {-3.0, 0.0, 1.5, 40.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(f.derivative(j), (f.rate(j + h) - f.rate(j - h)) / (2 * h), 1e-6);
  }
  EXPECT_EQ(Nonlinearity::from_name("softplus").name(), "softplus");
}

TEST(Network, InputSeriesMatchesDirectSum) {
  const auto model = fixtures::random_small_model(3, 4, 3);
  const auto raster = fixtures::random_raster(4, 4, 30, model.delta());
  for (int i = 0; i < 4; ++i) {
    const auto series = input_series(model, raster, i, 5, 30);
    for (int t = 5; t < 30; ++t) EXPECT_NEAR(series[t - 5], total_input(model, raster, i, t), 1e-12);
  }
}

TEST(Network, InputSeriesExclusion) {
  const auto model = fixtures::random_small_model(5, 3, 2);
  auto raster = fixtures::random_raster(6, 3, 20, model.delta());
  const auto excl = input_series(model, raster, 0, 0, 20, 2);
  for (int t = 0; t < 20; ++t) raster.set(2, t, false);
  const auto zeroed = input_series(model, raster, 0, 0, 20);
  for (int t = 0; t < 20; ++t) EXPECT_NEAR(excl[t], zeroed[t], 1e-12);
}

TEST(Network, LogJointDecomposesOverNeurons) {
  const auto model = fixtures::random_small_model(9, 3, 2);
  const auto raster = fixtures::random_raster(10, 3, 25, model.delta());
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const std::vector<int> one{i};
    sum += log_joint_terms(model, raster, one, 0, 12) + log_joint_terms(model, raster, one, 12, 25);
  }
  EXPECT_NEAR(sum, log_joint(model, raster), 1e-10);
}

TEST(Network, SimulationIsSeedDeterministicAndRefractory) {
  NetworkGenConfig cfg;
  cfg.neurons = 20;
  const auto model = build_random_network(cfg, 11);
  const auto a = simulate(model, 5000, 7);
  const auto b = simulate(model, 5000, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, simulate(model, 5000, 8));
  for (int i = 0; i < 20; ++i) {
    for (int t = 1; t < 5000; ++t) EXPECT_FALSE(a.at(i, t) && a.at(i, t - 1));
  }
}

TEST(Network, GeneratorHitsTargetRate) {
  NetworkGenConfig cfg;
  cfg.neurons = 30;
  const auto g = generate_network(cfg, 2);
  EXPECT_NEAR(g.pilot_rate, cfg.target_rate, cfg.rate_tolerance * cfg.target_rate);
  const long excit = std::count(g.excitatory.begin(), g.excitatory.end(), true);
  EXPECT_EQ(excit, 24);
  // Sign of every cross kernel follows the presynaptic type.
  for (const auto& e : g.model.entries()) {
    if (e.post == e.pre) continue;
    EXPECT_EQ(e.kernel.at(1) > 0.0, static_cast<bool>(g.excitatory[e.pre]));
  }
}

TEST(Network, CouplingScaleKeepsRefractoryWeight) {
  NetworkGenConfig cfg;
  cfg.neurons = 5;
  cfg.connection_probability = 1.0;
  const auto model = build_random_network(cfg, 1);
  const auto scaled = model.with_coupling_scale(3.0);
  EXPECT_EQ(scaled.self_kernel(0).at(1), kRefractoryWeight);
  EXPECT_NEAR(scaled.self_kernel(0).at(2), 3.0 * model.self_kernel(0).at(2), 1e-15);
  EXPECT_NEAR(scaled.kernel(0, 1)->at(3), 3.0 * model.kernel(0, 1)->at(3), 1e-15);
}

TEST(Network, RejectsBinWiderThanRefractoryPeriod) {
  NetworkGenConfig cfg;
  cfg.delta = 0.005;
  EXPECT_THROW(build_random_network(cfg, 1), std::invalid_argument);
}

TEST(Network, GeneratedSupports) {
  NetworkGenConfig cfg = NetworkGenConfig::toy();
  cfg.connection_probability = 1.0;
  cfg.neurons = 4;
  const auto model = build_random_network(cfg, 3);
  EXPECT_EQ(model.kernel(0, 1)->support(), 10);
  EXPECT_EQ(model.self_kernel(0).support(), 10);
}
