#include "spikesamp/nonlinearity.hpp"

#include <limits>
#include <stdexcept>

#include "spikesamp/errors.hpp"

namespace spikesamp {

Nonlinearity Nonlinearity::exponential() { return Nonlinearity(Kind::exponential, "exp", {}, {}); }

Nonlinearity Nonlinearity::custom(std::string name, Function rate, Function derivative) {
  if (!rate || !derivative) throw std::invalid_argument("custom nonlinearity needs f and f'");
  return Nonlinearity(Kind::custom, std::move(name), std::move(rate), std::move(derivative));
}

Nonlinearity Nonlinearity::softplus() {
  return custom(
      "softplus",
      [](double j) { return j > 30.0 ? j : std::log1p(std::exp(j)); },
      [](double j) { return 1.0 / (1.0 + std::exp(-j)); });
}

Nonlinearity Nonlinearity::from_name(const std::string& name) {
  if (name == "exp" || name == "exponential") return exponential();
  if (name == "softplus") return softplus();
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

double spike_probability(const Nonlinearity& f, double j, double delta, bool* clamped) {
  if (j <= kHardInputThreshold) return 0.0;
  const double p = f.rate(j) * delta;
  if (p > kMaxSpikeProbability) {
    if (clamped) *clamped = true;
    return kMaxSpikeProbability;
  }
  return p < 0.0 ? 0.0 : p;
}

double spike_log_mass(const Nonlinearity& f, double j, double delta, bool spike, JointForm form) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (form == JointForm::poisson) {
    if (j <= kHardInputThreshold) return spike ? kNegInf : 0.0;
    const double mean = f.rate(j) * delta;
    return spike ? f.log_rate(j) + std::log(delta) - mean : -mean;
  }
  if (j <= kHardInputThreshold) return spike ? kNegInf : 0.0;
  const double p = f.rate(j) * delta;
  if (p >= kMaxSpikeProbability) {
    return spike ? std::log(kMaxSpikeProbability) : std::log1p(-kMaxSpikeProbability);
  }
  return spike ? f.log_rate(j) + std::log(delta) : std::log1p(-p);
}

}  // namespace spikesamp
