#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "spikesamp/exact_hmm.hpp"

using namespace spikesamp;

TEST(ExactHmm, MarginalsMatchEnumeration) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto model = fixtures::random_small_model(seed, 3, 2);
    const auto raster = fixtures::random_raster(seed + 100, 3, 8, model.delta());
    const int i = static_cast<int>(seed % 3);
    const auto chain = build_conditional_chain(model, i, raster);
    const auto exact = exact_marginals(chain, model.delta());
    const auto brute = brute_force_marginals(model, i, raster);
    ASSERT_EQ(exact.size(), brute.size());
    for (std::size_t t = 0; t < exact.size(); ++t) EXPECT_NEAR(exact[t], brute[t], 1e-10 / model.delta());
  }
}

TEST(ExactHmm, SampledLogQMatchesEnumeratedPosterior) {
  const auto model = fixtures::random_small_model(7, 3, 2);
  auto raster = fixtures::random_raster(8, 3, 10, model.delta());
  const auto chain = build_conditional_chain(model, 1, raster);
  BackwardFilter filter(chain);
  const auto post = brute_force_posterior(model, 1, raster);
  double total = 0.0;
  for (double p : post) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  // Sampled-train log q against the enumerated posterior.
  Rng rng(3);
  for (int m = 0; m < 20; ++m) {
    const auto s = sample_chain(filter, rng);
    std::uint32_t code = 0;
    for (int t = 0; t < raster.bins(); ++t) code |= static_cast<std::uint32_t>(s.train[t]) << t;
    EXPECT_NEAR(s.log_q, std::log(post[code]), 1e-9);
    EXPECT_NEAR(chain_log_probability(filter, s.train), s.log_q, 1e-12);
  }
}
