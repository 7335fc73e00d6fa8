#pragma once

#include <cmath>
#include <functional>
#include <string>

namespace spikesamp {

// Inputs at or below this value are treated as a hard constraint: the
// spiking probability is exactly zero and a spike there has log-mass -inf.
inline constexpr double kHardInputThreshold = -1e5;

// Largest admissible per-bin spiking probability.
inline constexpr double kMaxSpikeProbability = 1.0 - 1e-12;

// Link from total input J to firing rate f(J) in Hz.
class Nonlinearity {
 public:
  enum class Kind { exponential, custom };

  using Function = std::function<double(double)>;

  static Nonlinearity exponential();
  // name is used for serialization; built-in names are "softplus".
  static Nonlinearity custom(std::string name, Function rate, Function derivative);
  static Nonlinearity softplus();
  static Nonlinearity from_name(const std::string& name);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_exponential() const { return kind_ == Kind::exponential; }

  double rate(double j) const { return kind_ == Kind::exponential ? std::exp(j) : rate_(j); }
  double derivative(double j) const {
    return kind_ == Kind::exponential ? std::exp(j) : derivative_(j);
  }
  // log f(J), exact in the far tail for the exponential link.
  double log_rate(double j) const { return kind_ == Kind::exponential ? j : std::log(rate_(j)); }

 private:
  Nonlinearity(Kind kind, std::string name, Function rate, Function derivative)
      : kind_(kind), name_(std::move(name)), rate_(std::move(rate)), derivative_(std::move(derivative)) {}

  Kind kind_;
  std::string name_;
  Function rate_;
  Function derivative_;
};

enum class JointForm { bernoulli, poisson };

// Per-bin spiking probability f(J)·Δ clamped to [0, kMaxSpikeProbability].
// `clamped` is set when the upper clamp was active.
double spike_probability(const Nonlinearity& f, double j, double delta, bool* clamped = nullptr);

// Log-mass of observing `spike` in one bin given input j.
// Bernoulli: n log p + (1-n) log(1-p). Poisson: n log(f Δ) - f Δ (binary n).
double spike_log_mass(const Nonlinearity& f, double j, double delta, bool spike,
                      JointForm form = JointForm::bernoulli);

}  // namespace spikesamp
