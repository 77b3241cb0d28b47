#include "wasn/sad.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "wasn/random.hpp"
#include "wasn/scene.hpp"

using namespace wasn;

TEST_CASE("detect_activity: all-zero signal is all inactive") {
  std::vector<double> x(50000, 0.0);
  const auto mask = detect_activity(x);
  for (bool f : mask.frame_flags) REQUIRE_FALSE(f);
}

TEST_CASE("detect_activity: constant tone throughout is all active") {
  std::vector<double> x(50000);
  for (size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(2.0 * kPi * 500.0 * double(i) / 16000.0);
  const auto mask = detect_activity(x);
  for (bool f : mask.frame_flags) REQUIRE(f);
}

TEST_CASE("detect_activity: 30 dB burst in noise matches the construction mask") {
  const double fs = 16000.0;
  Rng rng(5);
  const size_t len = size_t(10.0 * fs);
  const size_t burst_start = size_t(3.0 * fs), burst_len = size_t(4.0 * fs);
  auto burst = detail::speech_shaped_noise(burst_len, fs, 99);
  const double burst_rms = rms(burst);
  std::vector<double> x(len);
  const double noise_std = burst_rms / std::sqrt(db_to_power(30.0));
  for (auto& v : x) v = rng.normal(0.0, noise_std);
  for (size_t i = 0; i < burst_len; ++i) x[burst_start + i] += burst[i];

  const auto mask = detect_activity(x, 4096, 512, 10.0);
  size_t agree = 0;
  for (size_t l = 0; l < mask.num_frames(); ++l) {
    const size_t center = l * 512 + 2048;
    const bool truth = center >= burst_start && center < burst_start + burst_len;
    if (mask.frame_flags[l] == truth) ++agree;
  }
  REQUIRE(double(agree) / double(mask.num_frames()) >= 0.9);
}

TEST_CASE("detect_activity: empty signal is an error") {
  std::vector<double> x;
  REQUIRE_THROWS_AS(detect_activity(x), Error);
}

TEST_CASE("detect_activity: raising the threshold never adds active frames") {
  const double fs = 16000.0;
  Rng rng(6);
  std::vector<double> x(size_t(8.0 * fs));
  for (auto& v : x) v = rng.normal(0.0, 0.001);
  auto burst = detail::speech_shaped_noise(size_t(2.0 * fs), fs, 7);
  for (size_t i = 0; i < burst.size(); ++i) x[16000 + i] += burst[i];

  size_t prev_count = SIZE_MAX;
  for (double thr : {3.0, 6.0, 10.0, 15.0, 20.0}) {
    const auto mask = detect_activity(x, 4096, 512, thr);
    size_t count = 0;
    for (bool f : mask.frame_flags) count += f ? 1 : 0;
    REQUIRE(count <= prev_count);
    prev_count = count;
  }
}

TEST_CASE("segment_is_active: ratio thresholding") {
  ActivityMask mask;
  mask.frame_size = 1024;
  mask.frame_shift = 512;
  mask.frame_flags.assign(100, true);

  SECTION("fully active segment") {
    REQUIRE(segment_is_active(mask, 0, 20000, 0.75));
  }
  SECTION("fully inactive segment") {
    mask.frame_flags.assign(100, false);
    REQUIRE_FALSE(segment_is_active(mask, 0, 20000, 0.75));
  }
  SECTION("half active fails a 0.75 ratio") {
    for (size_t l = 0; l < 100; ++l) mask.frame_flags[l] = l % 2 == 0;
    REQUIRE_FALSE(segment_is_active(mask, 0, 20000, 0.75));
    REQUIRE(segment_is_active(mask, 0, 20000, 0.5));
  }
  SECTION("monotone nonincreasing in min_ratio") {
    for (size_t l = 0; l < 100; ++l) mask.frame_flags[l] = l % 4 != 0;
    bool prev = true;
    for (double ratio : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      const bool now = segment_is_active(mask, 0, 20000, ratio);
      REQUIRE((prev || !now));  // once false, stays false
      prev = now;
    }
  }
  SECTION("out-of-range segment is an error") {
    REQUIRE_THROWS_AS(segment_is_active(mask, 0, 200000, 0.75), std::invalid_argument);
  }
}
