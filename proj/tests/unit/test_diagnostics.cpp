#include <gtest/gtest.h>

#include <cmath>

#include "spikesamp/diagnostics.hpp"
#include "spikesamp/errors.hpp"
#include "spikesamp/random.hpp"

using namespace spikesamp;

namespace {

// Each sample copies the previous one with probability 1/2, else draws fresh
// Bernoulli(p) bits: the per-bin ACF is 0.5^l.
TrainSet copy_chain(int samples, int bins, double p, std::uint64_t seed) {
  Rng rng(seed);
  TrainSet out(samples, std::vector<std::uint8_t>(bins));
  for (int m = 0; m < samples; ++m) {
    for (int t = 0; t < bins; ++t) {
      out[m][t] = (m > 0 && bernoulli(rng, 0.5)) ? out[m - 1][t] : bernoulli(rng, p);
    }
  }
  return out;
}

}  // namespace

TEST(Diagnostics, CopyChainAcfIsGeometric) {
  const auto s = copy_chain(20000, 50, 0.3, 1);
  const auto acf = autocorrelation(s, 6);
  ASSERT_EQ(acf.size(), 7u);
  EXPECT_DOUBLE_EQ(acf[0], 1.0);
  for (int l = 1; l <= 6; ++l) EXPECT_NEAR(acf[l], std::pow(0.5, l), 0.01) << l;
}

TEST(Diagnostics, DenseOnesUseTheComplement) {
  const auto s = copy_chain(20000, 20, 0.9, 2);
  const auto acf = autocorrelation(s, 3);
  for (int l = 1; l <= 3; ++l) EXPECT_NEAR(acf[l], std::pow(0.5, l), 0.015);
}

TEST(Diagnostics, MatchesDirectEstimator) {
  const auto s = copy_chain(300, 4, 0.4, 3);
  const auto acf = autocorrelation(s, 5);
  std::vector<double> expect(6, 0.0);
  int used = 0;
  for (int t = 0; t < 4; ++t) {
    const int m = static_cast<int>(s.size());
    double mu = 0.0;
    for (const auto& x : s) mu += x[t];
    mu /= m;
    if (mu == 0.0 || mu == 1.0) continue;
    ++used;
    for (int l = 0; l <= 5; ++l) {
      double cov = 0.0;
      for (int k = 0; k + l < m; ++k) cov += (s[k][t] - mu) * (s[k + l][t] - mu);
      expect[l] += cov / m / (mu * (1 - mu));
    }
  }
  for (int l = 0; l <= 5; ++l) EXPECT_NEAR(acf[l], expect[l] / used, 1e-12);
}

TEST(Diagnostics, ConstantSamplesAreUndefined) {
  const TrainSet s(10, std::vector<std::uint8_t>(5, 0));
  EXPECT_THROW(autocorrelation(s, 2), NumericalError);
}

TEST(Diagnostics, IntegratedTimeStopsAtFirstNegative) {
  EXPECT_DOUBLE_EQ(integrated_autocorrelation_time({1.0, 0.5, 0.25, -0.1, 0.3}), 2.5);
  std::vector<double> geo{1.0};
  for (int l = 1; l < 60; ++l) geo.push_back(std::pow(0.5, l));
  EXPECT_NEAR(integrated_autocorrelation_time(geo), 3.0, 1e-12);
}

TEST(Diagnostics, PosteriorRateAndMeanSd) {
  const TrainSet one{{1, 0, 1}};
  const auto r = posterior_rate(one, 0.002);
  EXPECT_DOUBLE_EQ(r[0], 500.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  const auto ms = mean_sd({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_NEAR(ms.sd, std::sqrt(5.0 / 3.0), 1e-15);
}
