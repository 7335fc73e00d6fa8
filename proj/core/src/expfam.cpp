#include "spikesamp/expfam.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "spikesamp/errors.hpp"

namespace spikesamp {

ExpFamily ExpFamily::gaussian(double variance) {
  if (!(variance > 0.0)) throw ConfigError("Gaussian variance must be positive");
  ExpFamily e;
  e.name = "gaussian";
  e.f = [variance](double j) { return j / variance; };
  e.df = [variance](double) { return 1.0 / variance; };
  e.g = [variance](double j) { return -j * j / (2.0 * variance); };
  e.dg = [variance](double j) { return -j / variance; };
  e.mean = [](double j) { return j; };
  e.canonical = variance == 1.0;
  e.variance = variance;
  return e;
}

ExpFamily ExpFamily::poisson() {
  ExpFamily e;
  e.name = "poisson";
  e.f = [](double j) { return j; };
  e.df = [](double) { return 1.0; };
  e.g = [](double j) { return -std::exp(j); };
  e.dg = [](double j) { return -std::exp(j); };
  e.mean = [](double j) { return std::exp(j); };
  e.canonical = true;
  return e;
}

ExpFamily ExpFamily::poisson_exposure(double delta) {
  if (!(delta > 0.0)) throw ConfigError("exposure must be positive");
  ExpFamily e;
  e.name = "poisson_exposure";
  const double ld = std::log(delta);
  e.f = [ld](double j) { return j + ld; };
  e.df = [](double) { return 1.0; };
  e.g = [delta](double j) { return -delta * std::exp(j); };
  e.dg = [delta](double j) { return -delta * std::exp(j); };
  e.mean = [delta](double j) { return delta * std::exp(j); };
  return e;
}

void CoupledChainSpec::validate() const {
  if (nodes < 1 || bins < 1) throw ConfigError("coupled chain needs nodes >= 1 and bins >= 1");
  if (static_cast<int>(baselines.size()) != nodes || static_cast<int>(families.size()) != nodes) {
    throw ConfigError("baselines and families must be given per node");
  }
  for (const auto& b : baselines) {
    if (static_cast<int>(b.size()) != bins) throw ConfigError("baseline series must cover every bin");
  }
  for (const auto& c : couplings) {
    if (c.lag < 1) throw ConfigError("couplings must be strictly causal (lag >= 1)");
    if (c.post < 0 || c.post >= nodes || c.pre < 0 || c.pre >= nodes) throw ConfigError("coupling node out of range");
  }
  for (const auto& f : families) {
    if (!f.linear_statistic) throw ConfigError("only linear sufficient statistics are supported");
  }
}

CoupledChainSpec CoupledChainSpec::scaled(double eps) const {
  CoupledChainSpec out = *this;
  for (auto& c : out.couplings) c.weight *= eps;
  return out;
}

double CoupledChainSpec::input(int i, int t, const NodeSeries& values) const {
  double j = baselines[i][t];
  for (const auto& c : couplings) {
    if (c.post == i && t - c.lag >= 0) j += c.weight * values[c.pre][t - c.lag];
  }
  return j;
}

namespace {

template <typename Bracket>
std::vector<double> shift_with(const CoupledChainSpec& spec, int i, const NodeSeries& values, Bracket&& bracket) {
  spec.validate();
  if (i < 0 || i >= spec.nodes) throw std::out_of_range("node index");
  std::vector<double> out(spec.bins, 0.0);
  for (const auto& c : spec.couplings) {
    if (c.pre != i || c.post == i) continue;
    const int j = c.post;
    for (int t = 0; t + c.lag < spec.bins; ++t) {
      const int u = t + c.lag;
      out[t] += c.weight * bracket(j, u, values[j][u]);
    }
  }
  return out;
}

Eigen::MatrixXd coupling_matrix(const CoupledChainSpec& spec) {
  const int n = spec.nodes * spec.bins;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  const auto idx = [&](int node, int t) { return node * spec.bins + t; };
  for (const auto& c : spec.couplings) {
    for (int t = c.lag; t < spec.bins; ++t) w(idx(c.post, t), idx(c.pre, t - c.lag)) += c.weight;
  }
  return w;
}

void require_gaussian(const CoupledChainSpec& spec) {
  spec.validate();
  for (const auto& f : spec.families) {
    if (f.name != "gaussian") throw ConfigError("exact conditioning needs an all-Gaussian network");
  }
}

}  // namespace

std::vector<double> param_shift(const CoupledChainSpec& spec, int i, const NodeSeries& values) {
  return shift_with(spec, i, values, [&](int j, int u, double n) {
    const auto& fam = spec.families[j];
    const double b = spec.baselines[j][u];
    return fam.df(b) * n + fam.dg(b);
  });
}

std::vector<double> canonical_param_shift(const CoupledChainSpec& spec, int i, const NodeSeries& values) {
  for (const auto& f : spec.families) {
    if (!f.canonical) throw ConfigError("canonical shift needs canonical families");
  }
  return shift_with(spec, i, values, [&](int j, int u, double n) {
    return n - spec.families[j].mean(spec.baselines[j][u]);
  });
}

GaussianConditional gaussian_exact_conditional(const CoupledChainSpec& spec, int i, const NodeSeries& values) {
  require_gaussian(spec);
  const int T = spec.bins;
  const int n = spec.nodes * T;
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - coupling_matrix(spec);
  Eigen::VectorXd dinv(n), b(n), x(n);
  for (int node = 0; node < spec.nodes; ++node) {
    for (int t = 0; t < T; ++t) {
      dinv(node * T + t) = 1.0 / spec.families[node].variance;
      b(node * T + t) = spec.baselines[node][t];
      x(node * T + t) = values[node][t];
    }
  }
  // Joint precision of n = (I - W)^{-1}(b + eps), eps ~ N(0, D).
  const Eigen::MatrixXd prec = a.transpose() * dinv.asDiagonal() * a;
  const Eigen::VectorXd lin = a.transpose() * dinv.asDiagonal() * b;
  std::vector<int> own, rest;
  for (int k = 0; k < n; ++k) (k / T == i ? own : rest).push_back(k);
  Eigen::MatrixXd p_oo(T, T), p_or(T, rest.size());
  Eigen::VectorXd h(T), xr(rest.size());
  for (int r = 0; r < T; ++r) {
    h(r) = lin(own[r]);
    for (int c = 0; c < T; ++c) p_oo(r, c) = prec(own[r], own[c]);
    for (std::size_t c = 0; c < rest.size(); ++c) p_or(r, c) = prec(own[r], rest[c]);
  }
  for (std::size_t c = 0; c < rest.size(); ++c) xr(c) = x(rest[c]);
  Eigen::LLT<Eigen::MatrixXd> llt(p_oo);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional precision is singular");
  const Eigen::VectorXd mean = llt.solve(h - p_or * xr);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(T, T));
  GaussianConditional out;
  out.mean.assign(mean.data(), mean.data() + T);
  out.cov.assign(T, std::vector<double>(T));
  for (int r = 0; r < T; ++r)
    for (int c = 0; c < T; ++c) out.cov[r][c] = cov(r, c);
  return out;
}

std::vector<double> gaussian_first_order_mean(const CoupledChainSpec& spec, int i, const NodeSeries& values) {
  require_gaussian(spec);
  const int T = spec.bins;
  const double var = spec.families[i].variance;
  // Node i's own residual r = (I - W_ii) n_i - c, with c the baseline plus input from other nodes.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(T, T);
  Eigen::VectorXd c(T);
  for (int t = 0; t < T; ++t) c(t) = spec.baselines[i][t];
  for (const auto& k : spec.couplings) {
    if (k.post != i) continue;
    for (int t = k.lag; t < T; ++t) {
      if (k.pre == i) {
        a(t, t - k.lag) -= k.weight;
      } else {
        c(t) += k.weight * values[k.pre][t - k.lag];
      }
    }
  }
  const auto shift = param_shift(spec, i, values);
  Eigen::VectorXd h = a.transpose() * c / var;
  for (int t = 0; t < T; ++t) h(t) += shift[t];
  const Eigen::MatrixXd prec = a.transpose() * a / var;
  const Eigen::VectorXd mean = prec.llt().solve(h);
  return {mean.data(), mean.data() + T};
}

std::vector<double> halving_scales(int halvings) {
  std::vector<double> out;
  for (int k = 0; k <= halvings; ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

ConvergenceReport verify_first_order(const CoupledChainSpec& spec, int i, const NodeSeries& values,
                                     const std::vector<double>& scales, int fit_points) {
  ConvergenceReport report;
  for (double eps : scales) {
    const auto scaled = spec.scaled(eps);
    const auto exact = gaussian_exact_conditional(scaled, i, values).mean;
    const auto approx = gaussian_first_order_mean(scaled, i, values);
    double err = 0.0;
    for (std::size_t t = 0; t < exact.size(); ++t) err = std::max(err, std::abs(exact[t] - approx[t]));
    report.rows.push_back({eps, err});
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : report.rows) {
    if (r.scale > 0.0 && r.error > 0.0) pts.emplace_back(std::log(r.scale), std::log(r.error));
  }
  if (static_cast<int>(pts.size()) > fit_points) pts.erase(pts.begin(), pts.end() - fit_points);
  if (pts.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    report.slope = sxy / sxx;
  }
  return report;
}

NodeSeries simulate_gaussian_chain(const CoupledChainSpec& spec, unsigned long long seed) {
  require_gaussian(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise;
  NodeSeries v(spec.nodes, std::vector<double>(spec.bins, 0.0));
  for (int t = 0; t < spec.bins; ++t) {
    for (int i = 0; i < spec.nodes; ++i) {
      v[i][t] = spec.input(i, t, v) + std::sqrt(spec.families[i].variance) * noise(rng);
    }
  }
  return v;
}

}  // namespace spikesamp
