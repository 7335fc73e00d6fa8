#pragma once

#include <cstdint>
#include <vector>

namespace spikesamp {

using TrainSet = std::vector<std::vector<std::uint8_t>>;  // [sample][bin]

// Sample-index autocorrelation per bin, averaged over bins whose samples are
// not constant. acf[0] == 1. Throws when every bin is constant.
std::vector<double> autocorrelation(const TrainSet& samples, int max_lag);

// 1 + 2 * sum of the ACF up to (excluding) its first negative value.
double integrated_autocorrelation_time(const std::vector<double>& acf);

// Per-bin sample mean divided by delta.
std::vector<double> posterior_rate(const TrainSet& samples, double delta);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& values);

}  // namespace spikesamp
