#include "spikesamp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikesamp/errors.hpp"

namespace spikesamp {

std::vector<double> autocorrelation(const TrainSet& samples, int max_lag) {
  const int m = static_cast<int>(samples.size());
  if (m < 2) throw std::invalid_argument("autocorrelation needs at least two samples");
  const int bins = static_cast<int>(samples.front().size());
  max_lag = std::clamp(max_lag, 0, m - 1);
  std::vector<double> acc(max_lag + 1, 0.0);
  std::vector<int> ones;
  std::vector<long> prefix(m + 1);
  std::vector<long> pairs(max_lag + 1);
  int used = 0;
  for (int t = 0; t < bins; ++t) {
    ones.clear();
    for (int k = 0; k < m; ++k) {
      if (samples[k][t]) ones.push_back(k);
    }
    const int count = static_cast<int>(ones.size());
    if (count == 0 || count == m) continue;
    // The ACF of a binary series equals that of its complement; work with the sparser one.
    if (2 * count > m) {
      std::vector<int> zeros;
      zeros.reserve(m - count);
      for (int k = 0, p = 0; k < m; ++k) {
        if (p < count && ones[p] == k) {
          ++p;
        } else {
          zeros.push_back(k);
        }
      }
      ones.swap(zeros);
    }
    const int c = static_cast<int>(ones.size());
    const double mu = static_cast<double>(c) / m;
    std::fill(prefix.begin(), prefix.end(), 0);
    for (int k : ones) prefix[k + 1] = 1;
    for (int k = 0; k < m; ++k) prefix[k + 1] += prefix[k];
    std::fill(pairs.begin(), pairs.end(), 0);
    for (int a = 0; a < c; ++a) {
      for (int b = a; b < c && ones[b] - ones[a] <= max_lag; ++b) ++pairs[ones[b] - ones[a]];
    }
    const double var = mu * (1.0 - mu);
    for (int l = 0; l <= max_lag; ++l) {
      const double head = static_cast<double>(prefix[m - l]);      // sum_{k < m-l} x_k
      const double tail = static_cast<double>(prefix[m] - prefix[l]);  // sum_{k >= l} x_k
      const double cov = (pairs[l] - mu * (head + tail) + (m - l) * mu * mu) / m;
      acc[l] += cov / var;
    }
    ++used;
  }
  if (used == 0) throw NumericalError("autocorrelation undefined: every bin is constant across samples");
  for (auto& a : acc) a /= used;
  return acc;
}

double integrated_autocorrelation_time(const std::vector<double>& acf) {
  double tau = 1.0;
  for (std::size_t l = 1; l < acf.size() && acf[l] >= 0.0; ++l) tau += 2.0 * acf[l];
  return tau;
}

std::vector<double> posterior_rate(const TrainSet& samples, double delta) {
  if (samples.empty()) throw std::invalid_argument("posterior rate needs samples");
  std::vector<double> rate(samples.front().size(), 0.0);
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.size(); ++t) rate[t] += s[t];
  }
  for (auto& r : rate) r /= static_cast<double>(samples.size()) * delta;
  return rate;
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (values.size() - 1));
  }
  return out;
}

}  // namespace spikesamp
