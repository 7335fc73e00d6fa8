#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "spikesamp/exact_hmm.hpp"
#include "spikesamp/hybrid.hpp"
#include "spikesamp/proposals.hpp"

using namespace spikesamp;

namespace {

std::vector<std::uint8_t> bits_of(std::uint32_t code, int n) {
  std::vector<std::uint8_t> v(n);
  for (int t = 0; t < n; ++t) v[t] = (code >> t) & 1u;
  return v;
}

}  // namespace

TEST(Hybrid, TiltEqualsUnscaledFutureCorrection) {
  const auto model = fixtures::random_small_model(1, 4, 4);
  const auto raster = fixtures::random_raster(2, 4, 40, model.delta());
  for (int k : {0, 1, 3}) {
    const auto tilt = hybrid_tilt(model, 1, raster, 0, 40, k);
    const auto corr = future_correction(model, 1, raster, 0, 40, k, false);
    for (int t = 0; t < 40; ++t) EXPECT_NEAR(tilt[t], corr[t], 1e-12);
  }
}

TEST(Hybrid, ExactVariantIsThePosterior) {
  const auto model = fixtures::random_small_model(3, 3, 2);
  const auto raster = fixtures::random_raster(4, 3, 9, model.delta());
  HybridConfig cfg;
  cfg.exact = true;
  ChainProposal prop(model, 0, raster, Block{0, 9}, cfg);
  const auto post = brute_force_posterior(model, 0, raster);
  for (std::uint32_t c = 0; c < (1u << 9); c += 7) {
    if (post[c] == 0.0) continue;
    EXPECT_NEAR(prop.log_q(bits_of(c, 9)), std::log(post[c]), 1e-9);
  }
}

TEST(Hybrid, BlockProposalsAreNormalized) {
  const auto model = fixtures::random_small_model(5, 3, 3);
  const auto raster = fixtures::random_raster(6, 3, 16, model.delta());
  const Block b{4, 12};
  for (auto v : {HybridVariant::hybrid, HybridVariant::truncated_only, HybridVariant::weak_cross}) {
    HybridConfig cfg;
    cfg.variant = v;
    cfg.t_max = 0.01;  // one lag
    ChainProposal prop(model, 2, raster, b, cfg);
    double total = 0.0;
    for (std::uint32_t c = 0; c < (1u << 8); ++c) total += std::exp(prop.log_q(bits_of(c, 8)));
    EXPECT_NEAR(total, 1.0, 1e-10) << to_string(v);
  }
}

TEST(Hybrid, LongTruncationEqualsExactChain) {
  const auto model = fixtures::random_small_model(7, 3, 2);
  const auto raster = fixtures::random_raster(8, 3, 12, model.delta());
  const auto exact = build_conditional_chain(model, 1, raster);
  const auto trunc = build_truncated_chain(model, 1, raster, 5);
  ASSERT_EQ(exact.order(), trunc.order());
  for (int t = exact.begin(); t < exact.end(); ++t) {
    for (std::uint32_t s = 0; s < exact.num_states(); ++s) {
      EXPECT_NEAR(exact.log_factor(t, s, true), trunc.log_factor(t, s, true), 1e-12);
      EXPECT_NEAR(exact.log_factor(t, s, false), trunc.log_factor(t, s, false), 1e-12);
    }
  }
}

TEST(Hybrid, SampledLogQMatchesEvaluation) {
  const auto model = fixtures::random_small_model(9, 3, 3);
  const auto raster = fixtures::random_raster(10, 3, 30, model.delta());
  HybridConfig cfg;
  cfg.t_max = 0.02;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto tr = hybrid_proposal_sample(model, 1, raster, cfg, Block{5, 25}, seed);
    ChainProposal prop(model, 1, raster, Block{5, 25}, cfg);
    EXPECT_EQ(tr.train.size(), 20u);
    EXPECT_NEAR(tr.log_q, prop.log_q(tr.train), 1e-10);
  }
}

TEST(Hybrid, TruncationLags) {
  HybridConfig cfg;
  cfg.t_max = 0.010;
  EXPECT_EQ(truncation_lags(cfg, 0.002), 5);
  EXPECT_EQ(hybrid_variant_from_string(to_string(HybridVariant::weak_cross)), HybridVariant::weak_cross);
}

TEST(Hybrid, MhMarginalsMatchEnumeration) {
  const auto model = fixtures::random_small_model(11, 3, 2);
  const auto raster = fixtures::random_raster(12, 3, 8, model.delta());
  HybridConfig h;
  h.t_max = 0.01;
  const HybridProposalFactory factory(h);
  ChainConfig cfg;
  cfg.burn_in = 100;
  cfg.samples = 20000;
  cfg.seed = 3;
  const std::vector<int> hidden{0};
  const auto res = run_chain(model, raster, hidden, cfg, &factory);
  const auto brute = brute_force_marginals(model, 0, raster);
  for (int t = 0; t < 8; ++t) {
    double mean = 0.0;
    for (std::size_t m = 0; m < res.samples.size(); ++m) mean += res.samples.train(m, 0)[t];
    mean /= res.samples.size();
    const double p = brute[t] * model.delta();
    EXPECT_NEAR(mean, p, 4.5 * std::sqrt(p * (1 - p) / res.samples.size())) << t;
  }
}
