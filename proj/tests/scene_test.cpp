#include "wasn/scene.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wasn/dsp.hpp"
#include "wasn/sad.hpp"

using namespace wasn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

// --- wav I/O ---------------------------------------------------------------

TEST_CASE("wav: PCM16 full-scale square wave round trip") {
  AudioBuffer audio;
  audio.sample_rate = 16000.0;
  for (int i = 0; i < 256; ++i) audio.samples.push_back(i % 2 == 0 ? 1.0 : -1.0);
  const auto path = temp_path("wasn_square.wav");
  write_wav(path, audio, WavFormat::pcm16);
  const auto back = read_wav(path);
  REQUIRE(back.sample_rate == 16000.0);
  REQUIRE(back.samples.size() == 256);
  for (size_t i = 0; i < back.samples.size(); ++i) {
    const double expected = (i % 2 == 0) ? 32767.0 / 32768.0 : -32767.0 / 32768.0;
    REQUIRE(back.samples[i] == Catch::Approx(expected).margin(1e-9));
  }
}

TEST_CASE("wav: float32 round trip") {
  AudioBuffer audio;
  audio.sample_rate = 48000.0;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) audio.samples.push_back(rng.normal() * 0.1);
  const auto path = temp_path("wasn_float.wav");
  write_wav(path, audio, WavFormat::float32);
  const auto back = read_wav(path);
  REQUIRE(back.sample_rate == 48000.0);
  for (size_t i = 0; i < 1000; ++i)
    REQUIRE(back.samples[i] == Catch::Approx(audio.samples[i]).margin(1e-7));
}

TEST_CASE("wav: empty data chunk is an error") {
  AudioBuffer audio;
  audio.sample_rate = 16000.0;
  const auto path = temp_path("wasn_empty.wav");
  write_wav(path, audio, WavFormat::pcm16);
  REQUIRE_THROWS_AS(read_wav(path), Error);
}

TEST_CASE("wav: missing file is an error") {
  REQUIRE_THROWS_AS(read_wav(temp_path("wasn_does_not_exist.wav")), Error);
}

TEST_CASE("ingest_wav: 48 kHz file resampled to a third of its length") {
  AudioBuffer audio;
  audio.sample_rate = 48000.0;
  const size_t n48 = 48000;
  for (size_t i = 0; i < n48; ++i)
    audio.samples.push_back(0.5 * std::sin(2.0 * kPi * 440.0 * double(i) / 48000.0));
  const auto path = temp_path("wasn_48k.wav");
  write_wav(path, audio, WavFormat::float32);
  const auto resampled = ingest_wav(path, 16000.0);
  REQUIRE(std::llabs(long(resampled.size()) - long(n48 / 3)) <= 1);
  // tone survives: compare against an analytically generated 16 kHz tone
  double err = 0.0, ref = 0.0;
  for (size_t i = 100; i + 100 < resampled.size(); ++i) {
    const double expected = 0.5 * std::sin(2.0 * kPi * 440.0 * double(i) / 16000.0);
    err += (resampled[i] - expected) * (resampled[i] - expected);
    ref += expected * expected;
  }
  REQUIRE(std::sqrt(err / ref) < 0.01);
  REQUIRE_THROWS_AS(ingest_wav(path, 16000.0, false), Error);
}

// --- render_propagation -------------------------------------------------------

TEST_CASE("render_propagation: direct path delay and gain from geometry") {
  const double fs = 16000.0;
  std::vector<double> impulse(2048, 0.0);
  impulse[512] = 1.0;
  const Point3 src{3.43, 0.0, 0.0}, mic{0.0, 0.0, 0.0};
  const auto out = render_propagation(impulse, src, mic, ReverbSpec{}, fs);
  // d = 3.43 m, c = 343 -> exactly 160 samples, gain 1/3.43
  REQUIRE(out[512 + 160] == Catch::Approx(1.0 / 3.43).margin(1e-6));
  double energy_elsewhere = 0.0;
  for (size_t i = 0; i < out.size(); ++i)
    if (i != 512 + 160) energy_elsewhere += out[i] * out[i];
  REQUIRE(energy_elsewhere < 1e-9);
}

TEST_CASE("render_propagation: symmetric geometry gives zero TDOF") {
  ScenarioSpec spec;
  spec.duration_s = 8.0;
  spec.source_positions = {Point3{0.0, 3.0, 1.2}};  // equidistant from both nodes
  spec.num_positions = 1;
  spec.ou_node1.sigma_ou = spec.ou_node2.sigma_ou = 0.0;
  spec.seed = 11;
  auto [pair, truth] = generate_scenario(spec);
  REQUIRE(truth.tdof_per_position[0] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("render_propagation: reverb tail decays 60 dB over T60") {
  const double fs = 16000.0;
  std::vector<double> impulse(16384, 0.0);
  impulse[0] = 1.0;
  ReverbSpec reverb;
  reverb.enabled = true;
  reverb.t60_s = 0.3;
  const Point3 src{2.0, 0.0, 0.0}, mic{0.0, 0.0, 0.0};
  const auto rir = render_propagation(impulse, src, mic, reverb, fs, 77);
  // Schroeder backward integration over the tail
  const size_t tail_start = 200;  // past the direct path
  const size_t tail_end = tail_start + size_t(0.3 * fs);
  std::vector<double> edc(rir.size() + 1, 0.0);
  for (size_t i = rir.size(); i-- > 0;) edc[i] = edc[i + 1] + rir[i] * rir[i];
  const size_t half_window = size_t(0.15 * fs);
  const double drop_db =
      10.0 * std::log10(edc[tail_start] / edc[tail_start + half_window]);
  // 30 dB over half of T60 (plus the residual integration tail)
  REQUIRE(drop_db == Catch::Approx(30.0).margin(1.0));
  REQUIRE(tail_end < rir.size());
}

TEST_CASE("render_propagation: coincident source and mic is an error") {
  std::vector<double> x(100, 1.0);
  const Point3 p{1.0, 2.0, 3.0};
  REQUIRE_THROWS_AS(render_propagation(x, p, p, ReverbSpec{}, 16000.0),
                    std::invalid_argument);
}

// --- generate_scenario ----------------------------------------------------------

TEST_CASE("generate_scenario: single clean position shows only the TDOF") {
  ScenarioSpec spec;
  spec.duration_s = 12.0;
  spec.num_positions = 1;
  spec.source_positions = {Point3{2.4, 1.8, 1.5}};
  spec.snr_db = std::numeric_limits<double>::infinity();
  spec.ou_node1.sigma_ou = spec.ou_node2.sigma_ou = 0.0;
  spec.ou_node1.mu_inf = spec.ou_node2.mu_inf = 0.0;
  spec.pauses_enabled = false;
  spec.seed = 21;
  auto [pair, truth] = generate_scenario(spec);

  std::vector<double> a(pair.x1.begin() + 32768, pair.x1.begin() + 32768 + 16384);
  std::vector<double> b(pair.x2.begin() + 32768, pair.x2.begin() + 32768 + 16384);
  const auto res = gcc_phat(a, b, 256);
  REQUIRE(res.refined_lag == Catch::Approx(truth.tdof_per_position[0]).margin(0.5));
}

TEST_CASE("generate_scenario: pause leaves a >=1 s inactive gap") {
  ScenarioSpec spec;
  spec.duration_s = 30.0;
  spec.num_positions = 2;
  spec.pauses_enabled = true;
  spec.pause_min_s = 1.0;
  spec.pause_max_s = 1.5;
  spec.seed = 22;
  auto [pair, truth] = generate_scenario(spec);

  // find a run of inactive frames of at least 1 s (frame shift 1024)
  const size_t needed = size_t(1.0 * 16000.0 / 1024.0);
  size_t best_run = 0, run = 0;
  for (bool f : truth.activity_frames) {
    run = f ? 0 : run + 1;
    best_run = std::max(best_run, run);
  }
  REQUIRE(best_run >= needed);
}

TEST_CASE("generate_scenario: scenario-1 settings give a constant difference SRO") {
  ScenarioSpec spec;
  spec.duration_s = 10.0;
  spec.num_positions = 1;
  spec.ou_node1.sigma_ou = spec.ou_node2.sigma_ou = 0.0;
  spec.ou_node1.delta_start = spec.ou_node2.delta_start = 0.0;
  spec.ou_node1.mu_inf = 12.0;
  spec.ou_node2.mu_inf = 52.0;
  spec.seed = 23;
  auto [pair, truth] = generate_scenario(spec);
  for (double v : truth.sro_diff_trajectory.values) REQUIRE(v == 40.0);
}

TEST_CASE("generate_scenario: deterministic per seed") {
  ScenarioSpec spec;
  spec.duration_s = 6.0;
  spec.seed = 24;
  auto [a, ta] = generate_scenario(spec);
  auto [b, tb] = generate_scenario(spec);
  REQUIRE(a.x1 == b.x1);
  REQUIRE(a.x2 == b.x2);
  REQUIRE(ta.sro_diff_trajectory.values == tb.sro_diff_trajectory.values);
}

TEST_CASE("generate_scenario: clean signals match geometry during activity") {
  ScenarioSpec spec;
  spec.duration_s = 20.0;
  spec.num_positions = 2;
  spec.pauses_enabled = true;
  spec.seed = 25;
  auto [pair, truth] = generate_scenario(spec);

  for (const auto& span : truth.utterance_spans) {
    if (span.length < 32768) continue;
    std::vector<double> a(truth.clean1.begin() + long(span.start + 8192),
                          truth.clean1.begin() + long(span.start + 8192 + 16384));
    std::vector<double> b(truth.clean2.begin() + long(span.start + 8192),
                          truth.clean2.begin() + long(span.start + 8192 + 16384));
    const auto res = gcc_phat(a, b, 256);
    REQUIRE(res.refined_lag ==
            Catch::Approx(truth.tdof_per_position[size_t(span.position)]).margin(1.0));
  }
}

TEST_CASE("generate_scenario: activity mask covers the energetic frames") {
  ScenarioSpec spec;
  spec.duration_s = 20.0;
  spec.num_positions = 2;
  spec.seed = 26;
  auto [pair, truth] = generate_scenario(spec);

  size_t energetic = 0, covered = 0;
  for (size_t l = 0; l < truth.activity_frames.size(); ++l) {
    const double p = mean_power(std::span<const double>(truth.clean1)
                                    .subspan(l * truth.frame_shift, truth.frame_size));
    if (p > 1e-4) {  // -40 dBFS
      ++energetic;
      if (truth.activity_frames[l]) ++covered;
    }
  }
  REQUIRE(energetic > 0);
  REQUIRE(double(covered) / double(energetic) >= 0.95);
}

TEST_CASE("generate_scenario: coincident node and source is an error") {
  ScenarioSpec spec;
  spec.duration_s = 5.0;
  spec.source_positions = {spec.node_positions[0]};
  REQUIRE_THROWS_AS(generate_scenario(spec), std::invalid_argument);
}

TEST_CASE("generate_scenario: position_at_sample and spans are consistent") {
  ScenarioSpec spec;
  spec.duration_s = 15.0;
  spec.num_positions = 3;
  spec.seed = 27;
  auto [pair, truth] = generate_scenario(spec);
  for (const auto& span : truth.utterance_spans) {
    REQUIRE(truth.position_at_sample(span.start + span.length / 2) == span.position);
  }
}
