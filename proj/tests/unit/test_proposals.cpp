#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "spikesamp/proposals.hpp"

using namespace spikesamp;

namespace {

std::vector<std::uint8_t> bits_of(std::uint32_t code, int n) {
  std::vector<std::uint8_t> v(n);
  for (int t = 0; t < n; ++t) v[t] = (code >> t) & 1u;
  return v;
}

double log_sum_all(const ProposalSpec& spec, const NetworkModel& model, int i, const SpikeRaster& raster, Block b) {
  double total = 0.0;
  for (std::uint32_t c = 0; c < (1u << b.length()); ++c) {
    total += std::exp(log_q_of(spec, model, i, raster, b, bits_of(c, b.length())));
  }
  return total;
}

}  // namespace

TEST(Proposals, EveryKindIsNormalized) {
  const auto model = fixtures::random_small_model(2, 3, 2, 0.01, 1.0, true);
  const auto raster = fixtures::random_raster(3, 3, 14, model.delta());
  const Block b{3, 12};
  for (auto spec : {ProposalSpec{ProposalKind::homogeneous, 20.0}, ProposalSpec{ProposalKind::delayed_input, 0.0},
                    ProposalSpec{ProposalKind::weak_coupling, 0.0}}) {
    EXPECT_NEAR(log_sum_all(spec, model, 1, raster, b), 1.0, 1e-12) << to_string(spec.kind);
  }
}

TEST(Proposals, SampledLogQMatchesEvaluation) {
  const auto model = fixtures::random_small_model(4, 3, 2);
  const auto raster = fixtures::random_raster(5, 3, 40, model.delta());
  const Block b{0, 40};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ProposalSpec spec{ProposalKind::weak_coupling, 0.0};
    const auto tr = sample_proposal(spec, model, 0, raster, b, seed);
    EXPECT_NEAR(tr.log_q, log_q_of(spec, model, 0, raster, b, tr.train), 1e-12);
  }
}

TEST(Proposals, ProposalIgnoresBlockContents) {
  const auto model = fixtures::random_small_model(6, 3, 2);
  auto raster = fixtures::random_raster(7, 3, 20, model.delta());
  const Block b{5, 15};
  const std::vector<std::uint8_t> train(10, 0);
  const ProposalSpec spec{ProposalKind::weak_coupling, 0.0};
  const double before = log_q_of(spec, model, 2, raster, b, train);
  for (int t = 5; t < 15; ++t) raster.set(2, t, !raster.at(2, t));
  EXPECT_DOUBLE_EQ(before, log_q_of(spec, model, 2, raster, b, train));
}

TEST(Proposals, DelayedInputMatchesInputWithoutBlockSelfTerms) {
  const auto model = fixtures::random_small_model(8, 3, 3);
  auto raster = fixtures::random_raster(9, 3, 30, model.delta());
  const Block b{10, 20};
  const auto delayed = delayed_input(model, 1, raster, b);
  for (int t = 10; t < 30; ++t) raster.set(1, t, false);
  for (int t = 10; t < 20; ++t) {
    EXPECT_NEAR(delayed[t - 10], total_input(model, raster, 1, t) - model.baseline(1, t), 1e-12);
  }
}

TEST(Proposals, FutureCorrectionFastPathEqualsGeneral) {
  const auto model = fixtures::random_small_model(10, 4, 3);
  const auto raster = fixtures::random_raster(11, 4, 50, model.delta());
  const auto fast = future_correction(model, 2, raster, 0, 50);
  const auto general = future_correction(model, 2, raster, 0, 50, 0, true, true);
  for (int t = 0; t < 50; ++t) EXPECT_NEAR(fast[t], general[t], 1e-12);
}

TEST(Proposals, FutureCorrectionDirectFormula) {
  const auto model = fixtures::random_small_model(12, 3, 2);
  const auto raster = fixtures::random_raster(13, 3, 20, model.delta());
  const int i = 0;
  const auto corr = future_correction(model, i, raster, 0, 20, 1);
  for (int t = 0; t < 20; ++t) {
    double expect = 0.0;
    for (int j = 1; j < 3; ++j) {
      for (int l = 2; l <= 2 && t + l < 20; ++l) {
        const double b = model.baseline(j, t + l);
        expect += model.kernel(j, i)->at(l) * (raster.at(j, t + l) - std::exp(b) * model.delta());
      }
    }
    EXPECT_NEAR(corr[t], expect, 1e-12);
  }
}

TEST(Proposals, SoftplusPrefactorUsesLinkRatio) {
  auto base = fixtures::random_small_model(14, 2, 2);
  NetworkModel model(2, base.delta(), {{1.0}, {0.5}}, base.entries(), Nonlinearity::softplus());
  const auto raster = fixtures::random_raster(15, 2, 12, model.delta());
  const auto corr = future_correction(model, 0, raster, 0, 12);
  const auto& f = model.nonlinearity();
  for (int t = 0; t < 10; ++t) {
    double expect = 0.0;
    for (int l = 1; l <= 2; ++l) {
      const double b = 0.5;
      expect += model.kernel(1, 0)->at(l) * f.derivative(b) / f.rate(b) * (raster.at(1, t + l) - f.rate(b) * model.delta());
    }
    expect *= f.rate(1.0) / f.derivative(1.0);
    EXPECT_NEAR(corr[t], expect, 1e-12);
  }
}

TEST(Proposals, HomogeneousNeedsPositiveRate) {
  const auto model = fixtures::random_small_model(1, 2, 1);
  const auto raster = fixtures::random_raster(1, 2, 5, model.delta());
  EXPECT_THROW(sample_proposal({ProposalKind::homogeneous, 0.0}, model, 0, raster, {0, 5}, 1), std::invalid_argument);
  EXPECT_EQ(proposal_kind_from_string(to_string(ProposalKind::delayed_input)), ProposalKind::delayed_input);
}
