#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "wasn/common.hpp"
#include "wasn/random.hpp"

namespace wasn {

/// Parameters of the discrete Ornstein-Uhlenbeck clock model
///   eps[l] = eps[l-1] + theta * (mu_inf - eps[l-1]) + x[l],
///   x[l] ~ N(0, sigma_ou^2), eps[0] = mu_inf + delta_start.
/// All SRO quantities in ppm.
struct OuParams {
  double theta = 8e-4;          // per-step mean reversion, << 1
  double mu_inf = 0.0;          // asymptotic mean SRO, |mu_inf| <= 100 ppm
  double sigma_ou = 0.05;       // innovation std, ppm
  double delta_start = 0.0;     // initial offset from mu_inf, |.| <= 10 ppm
  double step_duration = 0.064; // seconds per process step

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0))
      throw std::invalid_argument("OuParams: require 0 < theta < 1");
    if (sigma_ou < 0.0) throw std::invalid_argument("OuParams: require sigma_ou >= 0");
    if (std::abs(mu_inf) > 100.0)
      throw std::invalid_argument("OuParams: |mu_inf| limited to 100 ppm");
    if (std::abs(delta_start) > 10.0)
      throw std::invalid_argument("OuParams: |delta_start| limited to 10 ppm");
    if (!(step_duration > 0.0))
      throw std::invalid_argument("OuParams: require step_duration > 0");
  }

  /// Steady-state standard deviation sigma_ou / sqrt(1 - (1-theta)^2), ppm.
  double stationary_std() const {
    const double a = 1.0 - theta;
    return sigma_ou / std::sqrt(1.0 - a * a);
  }
};

/// One realization of the SRO process, one value per process step.
struct SroTrajectory {
  std::vector<double> values;  // ppm
  double step_duration = 0.0;  // seconds
  OuParams params;
  uint64_t seed = 0;

  /// Piecewise-linear value at an arbitrary time (clamped at the ends).
  double at_time(double seconds) const {
    if (values.empty()) throw Error("SroTrajectory: empty");
    const double pos = seconds / step_duration;
    if (pos <= 0.0) return values.front();
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(i);
    return values[i] * (1.0 - frac) + values[i + 1] * frac;
  }
};

inline SroTrajectory simulate_trajectory(const OuParams& params, size_t num_steps,
                                         uint64_t seed) {
  params.validate();
  if (num_steps < 1) throw std::invalid_argument("simulate_trajectory: num_steps >= 1");
  SroTrajectory traj;
  traj.params = params;
  traj.step_duration = params.step_duration;
  traj.seed = seed;
  traj.values.resize(num_steps);
  traj.values[0] = params.mu_inf + params.delta_start;
  Rng rng(seed);
  for (size_t l = 1; l < num_steps; ++l) {
    const double prev = traj.values[l - 1];
    traj.values[l] = prev + params.theta * (params.mu_inf - prev) +
                     (params.sigma_ou > 0.0 ? rng.normal(0.0, params.sigma_ou) : 0.0);
  }
  return traj;
}

/// Pointwise difference eps_2 - eps_1 of two equally long trajectories.
inline SroTrajectory trajectory_difference(const SroTrajectory& a, const SroTrajectory& b) {
  if (a.values.size() != b.values.size() || a.step_duration != b.step_duration)
    throw std::invalid_argument("trajectory_difference: mismatched trajectories");
  SroTrajectory diff;
  diff.step_duration = a.step_duration;
  diff.params = b.params;
  diff.values.resize(a.values.size());
  for (size_t i = 0; i < a.values.size(); ++i) diff.values[i] = b.values[i] - a.values[i];
  return diff;
}

/// Sample standard deviation of values[burn_in..]; used to bucket
/// experiments into sigma-bands.
inline double trajectory_std(const SroTrajectory& traj, size_t burn_in) {
  if (burn_in >= traj.values.size())
    throw std::invalid_argument("trajectory_std: burn_in beyond trajectory");
  const size_t n = traj.values.size() - burn_in;
  if (n < 2) throw Error("trajectory_std: need at least 2 post-burn-in values");
  double mean = 0.0;
  for (size_t i = burn_in; i < traj.values.size(); ++i) mean += traj.values[i];
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (size_t i = burn_in; i < traj.values.size(); ++i) {
    const double d = traj.values[i] - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n - 1));
}

}  // namespace wasn
