#pragma once

#include <functional>
#include <string>
#include <vector>

namespace spikesamp {

// log p(n | J) = f(J) k(n) + g(J) + h(n) with k(n) = n.
struct ExpFamily {
  using Fn = std::function<double(double)>;
  std::string name;
  Fn f, df, g, dg;
  Fn mean;  // E[n | J]
  bool canonical = false;
  bool linear_statistic = true;
  double variance = 0.0;  // Gaussian only

  static ExpFamily gaussian(double variance);
  // Canonical Poisson, n ~ Poisson(exp(J)).
  static ExpFamily poisson();
  // n ~ Poisson(exp(J) delta): f(J) = J + log delta, g(J) = -delta exp(J).
  static ExpFamily poisson_exposure(double delta);
};

// w^{post,pre}_lag: effect of n_pre(t - lag) on J_post(t).
struct ChainCoupling {
  int post;
  int pre;
  int lag;
  double weight;
};

using NodeSeries = std::vector<std::vector<double>>;  // [node][bin]

struct CoupledChainSpec {
  int nodes = 0;
  int bins = 0;
  NodeSeries baselines;
  std::vector<ChainCoupling> couplings;
  std::vector<ExpFamily> families;

  void validate() const;
  // Copy with every coupling multiplied by eps. Self couplings are scaled
  // too: the expansion is around b, so other nodes' own history must vanish
  // with eps for the residual to be second order.
  CoupledChainSpec scaled(double eps) const;
  // J_it; values before bin 0 are zero.
  double input(int i, int t, const NodeSeries& values) const;
};

// Shift of node i's natural parameter at every bin:
//   sum_{s>0, j != i} w^{ji}_s [f_j'(b_{j,t+s}) n_{j,t+s} + g_j'(b_{j,t+s})].
std::vector<double> param_shift(const CoupledChainSpec& spec, int i, const NodeSeries& values);

// Same shift written through the canonical identity g'(b) = -E[n|b] (requires canonical families):
//   sum_{s>0, j != i} w^{ji}_s [n_{j,t+s} - E(n_{j,t+s} | b_{j,t+s})].
std::vector<double> canonical_param_shift(const CoupledChainSpec& spec, int i, const NodeSeries& values);

struct GaussianConditional {
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;
};

// Exact conditional of node i's series given all other nodes, for a
// linear-Gaussian network (every family Gaussian).
GaussianConditional gaussian_exact_conditional(const CoupledChainSpec& spec, int i, const NodeSeries& values);

// Conditional mean of node i under the first-order shifted model: node i's
// own autoregression is kept exactly, future effects enter through param_shift.
std::vector<double> gaussian_first_order_mean(const CoupledChainSpec& spec, int i, const NodeSeries& values);

struct ConvergenceRow {
  double scale;
  double error;  // max_t |first-order mean - exact mean|
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  // Least-squares log-log slope over the last `fit_points` rows.
  double slope = 0.0;
};

ConvergenceReport verify_first_order(const CoupledChainSpec& spec, int i, const NodeSeries& values,
                                     const std::vector<double>& scales, int fit_points = 4);

// Halving grid {1, 1/2, ..., 2^-(halvings)}.
std::vector<double> halving_scales(int halvings);

// Draw a realization of a Gaussian network by forward recursion.
NodeSeries simulate_gaussian_chain(const CoupledChainSpec& spec, unsigned long long seed);

}  // namespace spikesamp
