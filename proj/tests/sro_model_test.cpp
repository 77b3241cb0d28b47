#include "wasn/sro_model.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

using namespace wasn;

TEST_CASE("simulate_trajectory: noise-free decay is exactly exponential") {
  OuParams p;
  p.theta = 0.01;
  p.mu_inf = 31.0;
  p.sigma_ou = 0.0;
  p.delta_start = 10.0;
  const auto traj = simulate_trajectory(p, 500, 1);
  REQUIRE(traj.values[0] == 41.0);
  for (size_t l = 0; l < traj.values.size(); ++l) {
    const double expected = 31.0 + 10.0 * std::pow(0.99, double(l));
    REQUIRE(traj.values[l] == Catch::Approx(expected).margin(1e-9));
  }
}

TEST_CASE("simulate_trajectory: zero noise and zero start offset is constant") {
  OuParams p;
  p.theta = 8e-4;
  p.mu_inf = -42.5;
  p.sigma_ou = 0.0;
  p.delta_start = 0.0;
  const auto traj = simulate_trajectory(p, 1000, 2);
  for (double v : traj.values) REQUIRE(v == -42.5);
}

TEST_CASE("simulate_trajectory: stationary std matches the closed form") {
  OuParams p;
  p.theta = 8e-4;
  p.mu_inf = 0.0;
  p.sigma_ou = 0.05;
  p.delta_start = 0.0;
  const double predicted = p.stationary_std();
  // sigma_ou / sqrt(1-(1-theta)^2) with these defaults is the documented
  // 1.25 ppm steady state
  REQUIRE(predicted == Catch::Approx(1.25).epsilon(0.001));
  const auto traj = simulate_trajectory(p, 1000000, 3);
  const double measured = trajectory_std(traj, 20000);
  REQUIRE(measured == Catch::Approx(predicted).epsilon(0.05));
}

TEST_CASE("simulate_trajectory: deterministic per seed") {
  OuParams p;
  const auto a = simulate_trajectory(p, 5000, 77);
  const auto b = simulate_trajectory(p, 5000, 77);
  REQUIRE(a.values == b.values);
  const auto c = simulate_trajectory(p, 5000, 78);
  REQUIRE(a.values != c.values);
}

TEST_CASE("simulate_trajectory: mean reversion across seeded realizations") {
  OuParams p;
  p.theta = 5e-3;
  p.mu_inf = 20.0;
  p.sigma_ou = 0.05;
  p.delta_start = 8.0;
  const size_t steps = 400;
  const int runs = 1000;
  std::vector<double> mean(steps, 0.0);
  for (int r = 0; r < runs; ++r) {
    const auto traj = simulate_trajectory(p, steps, uint64_t(1000 + r));
    for (size_t l = 0; l < steps; ++l) mean[l] += traj.values[l];
  }
  for (auto& v : mean) v /= runs;
  // E[eps[l]] - mu_inf = delta_start * (1-theta)^l; the sample mean has
  // std <= stationary_std/sqrt(runs)
  const double se = p.stationary_std() / std::sqrt(double(runs));
  for (size_t l = 0; l < steps; l += 25) {
    const double expected = 20.0 + 8.0 * std::pow(1.0 - p.theta, double(l));
    REQUIRE(std::abs(mean[l] - expected) < 3.0 * se);
  }
}

TEST_CASE("simulate_trajectory: invalid parameters rejected") {
  OuParams p;
  p.theta = 0.0;
  REQUIRE_THROWS_AS(simulate_trajectory(p, 10, 1), std::invalid_argument);
  p = OuParams{};
  p.mu_inf = 150.0;
  REQUIRE_THROWS_AS(simulate_trajectory(p, 10, 1), std::invalid_argument);
  p = OuParams{};
  p.delta_start = 11.0;
  REQUIRE_THROWS_AS(simulate_trajectory(p, 10, 1), std::invalid_argument);
}

TEST_CASE("trajectory_std: constant trajectory has zero std") {
  OuParams p;
  p.sigma_ou = 0.0;
  const auto traj = simulate_trajectory(p, 100, 4);
  REQUIRE(trajectory_std(traj, 0) == 0.0);
}

TEST_CASE("trajectory_std: two-point hand computation") {
  SroTrajectory traj;
  traj.step_duration = 1.0;
  traj.values = {1.0, 3.0};
  REQUIRE(trajectory_std(traj, 0) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("trajectory_std: too few values is an error") {
  SroTrajectory traj;
  traj.step_duration = 1.0;
  traj.values = {1.0, 2.0, 3.0};
  REQUIRE_THROWS_AS(trajectory_std(traj, 2), Error);
  REQUIRE_THROWS_AS(trajectory_std(traj, 3), std::invalid_argument);
}

TEST_CASE("trajectory at_time: clamped linear interpolation") {
  SroTrajectory traj;
  traj.step_duration = 0.5;
  traj.values = {0.0, 10.0, 20.0};
  REQUIRE(traj.at_time(-1.0) == 0.0);
  REQUIRE(traj.at_time(0.25) == Catch::Approx(5.0));
  REQUIRE(traj.at_time(0.75) == Catch::Approx(15.0));
  REQUIRE(traj.at_time(5.0) == 20.0);
}

TEST_CASE("trajectory_difference: pointwise subtraction") {
  OuParams p;
  p.sigma_ou = 0.05;
  const auto a = simulate_trajectory(p, 200, 5);
  const auto b = simulate_trajectory(p, 200, 6);
  const auto d = trajectory_difference(a, b);
  for (size_t i = 0; i < d.values.size(); ++i)
    REQUIRE(d.values[i] == b.values[i] - a.values[i]);
}
