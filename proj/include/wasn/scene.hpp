#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wasn/async_model.hpp"
#include "wasn/common.hpp"
#include "wasn/dsp.hpp"
#include "wasn/random.hpp"
#include "wasn/sro_model.hpp"
#include "wasn/wav.hpp"

namespace wasn {

inline constexpr double kSpeedOfSound = 343.0;  // m/s

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Synthetic room response: direct path plus an optional exponentially
/// decaying noise tail. The tail energy is distance independent and equals
/// the direct-path energy at critical_distance_m.
struct ReverbSpec {
  bool enabled = false;
  double t60_s = 0.3;
  double critical_distance_m = 2.0;
};

struct UtteranceSpec {
  int position_index = 0;
  double duration_s = 3.0;  // used for synthetic sources
  std::string wav_path;     // optional: ingest audio instead
};

/// Declarative description of a simulated two-node meeting recording.
struct ScenarioSpec {
  std::array<Point3, 2> node_positions{Point3{-0.75, 0.0, 1.2}, Point3{0.75, 0.0, 1.2}};
  std::vector<Point3> source_positions;  // empty: drawn from the seed
  int num_positions = 0;                 // 0: draw uniform [2,4] when auto
  std::vector<UtteranceSpec> utterances; // empty: auto timeline until duration
  bool pauses_enabled = true;
  double pause_min_s = 0.5, pause_max_s = 2.0;  // at position changes
  double duration_s = 300.0;
  double snr_db = 30.0;       // average SNR at the 3.2 m reference distance
  OuParams ou_node1, ou_node2;
  double sto_node1_s = 0.0, sto_node2_s = 0.0;
  ReverbSpec reverb;
  double sample_rate = 16000.0;
  uint64_t seed = 1;
};

struct UtteranceSpan {
  size_t start = 0, length = 0;
  int position = 0;
};

/// Everything the estimators are scored against.
struct GroundTruth {
  SroTrajectory sro_node1, sro_node2;
  SroTrajectory sro_diff_trajectory;  // eps_2 - eps_1
  double sto_samples = 0.0;           // (T2 - T1) * f_s
  double sto_node1_s = 0.0, sto_node2_s = 0.0;
  std::vector<double> tdof_per_position;  // (d2 - d1)/c * f_s per position
  std::vector<double> dist_node1, dist_node2;  // meters per position
  std::vector<UtteranceSpan> utterance_spans;
  std::vector<bool> activity_frames;  // per sim frame
  std::vector<int> position_index;    // per sim frame, -1 when silent
  size_t frame_size = 4096, frame_shift = 1024;
  DelayCurve delay_node1, delay_node2;  // curves applied by the asynchronizer
  double sample_rate = 16000.0;
  std::vector<double> clean1, clean2;  // pre-async node signals

  /// SRO-induced delay difference (STO contribution removed), in samples.
  double sro_delay_diff_at(double n) const {
    const double d1 = delay_node1.at_sample(n) + sto_node1_s * sample_rate;
    const double d2 = delay_node2.at_sample(n) + sto_node2_s * sample_rate;
    return d2 - d1;
  }

  /// Position active at sample n; falls back to the nearest utterance.
  int position_at_sample(size_t n) const {
    if (utterance_spans.empty()) throw Error("GroundTruth: no utterances");
    const UtteranceSpan* best = nullptr;
    size_t best_dist = SIZE_MAX;
    for (const auto& u : utterance_spans) {
      if (n >= u.start && n < u.start + u.length) return u.position;
      const size_t d = n < u.start ? u.start - n : n - (u.start + u.length - 1);
      if (d < best_dist) {
        best_dist = d;
        best = &u;
      }
    }
    return best->position;
  }
};

struct AsyncRecordingPair {
  std::vector<double> x1, x2;
  double sample_rate = 16000.0;
};

namespace detail {

/// Fractional-delay FIR taps: kernel[j] interpolates a delay of
/// frac in (-1, 1) at tap offset j - half + 1.
inline std::vector<double> fractional_delay_kernel(double frac, int half_taps = 32,
                                                   double beta = 8.6) {
  static const SincInterpolator interp(32, 8.6);
  std::vector<double> kern(2 * half_taps);
  const double s = std::sin(kPi * frac);
  for (int j = 0; j < 2 * half_taps; ++j) {
    const int off = j - half_taps + 1;
    const double t = frac - double(off);
    double sinc;
    if (std::abs(t) < 1e-9) {
      sinc = 1.0;
    } else {
      sinc = s * ((off % 2 == 0) ? 1.0 : -1.0) / (kPi * t);
    }
    kern[size_t(j)] = sinc * interp.window(t);
  }
  return kern;
}

inline std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  const size_t out_len = a.size() + b.size() - 1;
  const size_t p = next_power_of_two(out_len);
  std::vector<std::complex<double>> fa(p), fb(p);
  for (size_t i = 0; i < a.size(); ++i) fa[i] = {a[i], 0.0};
  for (size_t i = 0; i < b.size(); ++i) fb[i] = {b[i], 0.0};
  auto A = fft::forward(fa);
  const auto B = fft::forward(fb);
  for (size_t i = 0; i < p; ++i) A[i] *= B[i];
  const auto y = fft::inverse(A);
  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = y[i].real();
  return out;
}

/// Speech-shaped source: pink noise (Kellet filter) with a ~4 Hz syllabic
/// amplitude modulation and short edge fades.
inline std::vector<double> speech_shaped_noise(size_t num_samples, double sample_rate,
                                               uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(num_samples);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  const double mod_rate = rng.uniform(3.5, 4.5);
  const double mod_phase = rng.uniform(0.0, 2.0 * kPi);
  for (size_t n = 0; n < num_samples; ++n) {
    const double white = rng.normal();
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    const double pink = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362) * 0.11;
    b6 = white * 0.115926;
    const double t = double(n) / sample_rate;
    const double syllabic = 0.5 + 0.5 * std::sin(2.0 * kPi * mod_rate * t + mod_phase);
    out[n] = pink * (0.35 + 0.65 * syllabic);
  }
  const double r = rms(out);
  if (r > 0.0)
    for (auto& v : out) v *= 0.1 / r;
  const size_t fade = std::min<size_t>(size_t(0.02 * sample_rate), num_samples / 2);
  for (size_t i = 0; i < fade; ++i) {
    const double g = double(i) / double(fade);
    out[i] *= g;
    out[num_samples - 1 - i] *= g;
  }
  return out;
}

}  // namespace detail

/// Renders sound propagation from a source position to a microphone:
/// fractional direct-path delay d/c*f_s with 1/d gain, plus the optional
/// stochastic exponential reverb tail.
inline std::vector<double> render_propagation(std::span<const double> source,
                                              const Point3& src_pos, const Point3& mic_pos,
                                              const ReverbSpec& reverb, double sample_rate,
                                              uint64_t rir_seed = 0) {
  const double d = distance(src_pos, mic_pos);
  if (d < 1e-3) throw std::invalid_argument("render_propagation: coincident source and mic");
  const double delay = d / kSpeedOfSound * sample_rate;
  const long delay_int = long(std::floor(delay));
  const double frac = delay - double(delay_int);
  const double gain = 1.0 / d;

  constexpr int kHalfTaps = 32;
  const auto kern = detail::fractional_delay_kernel(frac, kHalfTaps);

  std::vector<double> rir;
  long rir_offset;  // sample index of rir[0] relative to emission time
  if (!reverb.enabled) {
    rir.assign(kern.size(), 0.0);
    for (size_t j = 0; j < kern.size(); ++j) rir[j] = kern[j] * gain;
    rir_offset = delay_int - kHalfTaps + 1;
  } else {
    const size_t tail_len = size_t(reverb.t60_s * 1.2 * sample_rate);
    rir.assign(2 * kHalfTaps + tail_len, 0.0);
    for (size_t j = 0; j < kern.size(); ++j) rir[j] = kern[j] * gain;
    // diffuse tail: energy = direct energy at the critical distance
    const double tail_energy = 1.0 / (reverb.critical_distance_m * reverb.critical_distance_m);
    const double decay = 6.908 / (reverb.t60_s * sample_rate);  // ln(1e3) amplitude rate
    // sum of exp(-2*decay*t) over the tail ~ 1/(2*decay)
    const double sigma = std::sqrt(tail_energy * 2.0 * decay);
    Rng rng(rir_seed);
    const size_t tail_start = size_t(kHalfTaps) + size_t(0.002 * sample_rate);
    for (size_t t = tail_start; t < rir.size(); ++t) {
      const double env = std::exp(-decay * double(t - tail_start));
      rir[t] += sigma * env * rng.normal();
    }
    rir_offset = delay_int - kHalfTaps + 1;
  }

  const auto conv = detail::fft_convolve(source, rir);
  std::vector<double> out(source.size(), 0.0);
  for (size_t i = 0; i < conv.size(); ++i) {
    const long n = long(i) + rir_offset;
    if (n >= 0 && n < long(out.size())) out[size_t(n)] = conv[i];
  }
  return out;
}

/// Loads a mono WAV as a normalized sample stream at the target rate.
/// Rate mismatches are resampled with a windowed sinc when allowed.
inline std::vector<double> ingest_wav(const std::string& path, double target_rate,
                                      bool allow_resample = true) {
  const AudioBuffer audio = read_wav(path);
  if (audio.samples.empty()) throw Error("ingest_wav: empty audio: " + path);
  if (audio.sample_rate == target_rate) return audio.samples;
  if (!allow_resample)
    throw Error("ingest_wav: sample rate mismatch without resampler: " + path);
  const double ratio = audio.sample_rate / target_rate;
  const SincInterpolator interp(32, 8.6, std::min(1.0, 1.0 / ratio));
  const size_t out_len = size_t(std::floor(double(audio.samples.size()) / ratio));
  std::vector<double> out(out_len);
  for (size_t n = 0; n < out_len; ++n) out[n] = interp.at(audio.samples, double(n) * ratio);
  return out;
}

/// Builds the two-node recording pair plus full ground truth. Deterministic
/// per spec + seed.
inline std::pair<AsyncRecordingPair, GroundTruth> generate_scenario(const ScenarioSpec& spec) {
  if (!(spec.duration_s > 1.0)) throw std::invalid_argument("ScenarioSpec: duration too short");
  const double fs = spec.sample_rate;
  const size_t total_samples = size_t(spec.duration_s * fs);

  // geometry
  std::vector<Point3> positions = spec.source_positions;
  if (positions.empty()) {
    Rng geo(Rng::derive_seed(spec.seed, 0));
    int m = spec.num_positions;
    if (m <= 0) m = 2 + int(geo.integer(3));  // uniform [2,4]
    for (int i = 0; i < m; ++i) {
      const double ang = geo.uniform(0.0, 2.0 * kPi);
      const double rad = geo.uniform(2.0, 4.3);
      positions.push_back(Point3{rad * std::cos(ang), rad * std::sin(ang),
                                 geo.uniform(1.2, 1.8)});
    }
  }
  const size_t num_pos = positions.size();
  for (size_t m = 0; m < num_pos; ++m)
    for (const auto& node : spec.node_positions)
      if (distance(positions[m], node) < 1e-3)
        throw std::invalid_argument("ScenarioSpec: coincident node and source");

  // timeline
  std::vector<UtteranceSpan> spans;
  std::vector<std::pair<UtteranceSpec, size_t>> placed;  // utterance + start sample
  std::vector<std::vector<double>> preloaded;            // ingested audio per placed entry
  {
    Rng tl(Rng::derive_seed(spec.seed, 1));
    if (!spec.utterances.empty()) {
      size_t cursor = 0;
      for (const auto& u : spec.utterances) {
        if (u.position_index < 0 || size_t(u.position_index) >= num_pos)
          throw std::invalid_argument("ScenarioSpec: utterance position out of range");
        std::vector<double> audio;
        size_t len;
        if (!u.wav_path.empty()) {
          audio = ingest_wav(u.wav_path, fs);
          len = audio.size();
        } else {
          len = size_t(u.duration_s * fs);
        }
        if (cursor + len > total_samples) break;
        placed.push_back({u, cursor});
        preloaded.push_back(std::move(audio));
        spans.push_back({cursor, len, u.position_index});
        cursor += len;
      }
    } else {
      size_t cursor = 0;
      int pos = 0;
      bool first_visit = true;
      while (cursor < total_samples) {
        if (!first_visit && spec.pauses_enabled)
          cursor += size_t(tl.uniform(spec.pause_min_s, spec.pause_max_s) * fs);
        first_visit = false;
        const int utt_count = num_pos == 1 ? 4 : 1 + int(tl.integer(4));
        for (int u = 0; u < utt_count && cursor < total_samples; ++u) {
          UtteranceSpec utt;
          utt.position_index = pos;
          utt.duration_s = tl.uniform(2.0, 5.0);
          size_t len = size_t(utt.duration_s * fs);
          if (cursor + len > total_samples) {
            len = total_samples - cursor;
            if (len < size_t(0.5 * fs)) break;
            utt.duration_s = double(len) / fs;
          }
          placed.push_back({utt, cursor});
          spans.push_back({cursor, len, pos});
          cursor += len;
        }
        pos = int((size_t(pos) + 1) % num_pos);
      }
    }
  }
  if (spans.empty()) throw Error("generate_scenario: empty timeline");

  // clean node signals
  GroundTruth truth;
  truth.sample_rate = fs;
  truth.utterance_spans = spans;
  truth.clean1.assign(total_samples, 0.0);
  truth.clean2.assign(total_samples, 0.0);
  for (size_t m = 0; m < num_pos; ++m) {
    truth.dist_node1.push_back(distance(positions[m], spec.node_positions[0]));
    truth.dist_node2.push_back(distance(positions[m], spec.node_positions[1]));
    truth.tdof_per_position.push_back((truth.dist_node2[m] - truth.dist_node1[m]) /
                                      kSpeedOfSound * fs);
  }
  for (size_t i = 0; i < placed.size(); ++i) {
    const auto& [utt, start] = placed[i];
    std::vector<double> source;
    if (i < preloaded.size() && !preloaded[i].empty()) {
      source = std::move(preloaded[i]);
    } else {
      source = detail::speech_shaped_noise(spans[i].length, fs,
                                           Rng::derive_seed(spec.seed, 100 + i));
    }
    for (int node = 0; node < 2; ++node) {
      const auto rendered = render_propagation(
          source, positions[size_t(utt.position_index)], spec.node_positions[size_t(node)],
          spec.reverb, fs, Rng::derive_seed(spec.seed, 200 + size_t(utt.position_index) * 2 + size_t(node)));
      auto& clean = node == 0 ? truth.clean1 : truth.clean2;
      for (size_t j = 0; j < rendered.size() && start + j < total_samples; ++j)
        clean[start + j] += rendered[j];
    }
  }

  // activity / position per sim frame
  const size_t n_sim = truth.frame_size, b_sim = truth.frame_shift;
  const size_t num_frames = total_samples >= n_sim ? (total_samples - n_sim) / b_sim + 1 : 0;
  truth.activity_frames.assign(num_frames, false);
  truth.position_index.assign(num_frames, -1);
  for (size_t l = 0; l < num_frames; ++l) {
    const size_t center = l * b_sim + n_sim / 2;
    for (const auto& u : spans) {
      if (center >= u.start && center < u.start + u.length) {
        truth.activity_frames[l] = true;
        truth.position_index[l] = u.position;
        break;
      }
    }
  }

  // clock model
  const size_t traj_steps = size_t(spec.duration_s / spec.ou_node1.step_duration) + 16;
  truth.sro_node1 = simulate_trajectory(spec.ou_node1, traj_steps, Rng::derive_seed(spec.seed, 6));
  truth.sro_node2 = simulate_trajectory(spec.ou_node2, traj_steps, Rng::derive_seed(spec.seed, 7));
  truth.sro_diff_trajectory = trajectory_difference(truth.sro_node1, truth.sro_node2);
  truth.sto_node1_s = spec.sto_node1_s;
  truth.sto_node2_s = spec.sto_node2_s;
  truth.sto_samples = (spec.sto_node2_s - spec.sto_node1_s) * fs;

  AsyncRecordingPair pair;
  pair.sample_rate = fs;
  for (int node = 0; node < 2; ++node) {
    AsyncSpec aspec;
    aspec.sto_seconds = node == 0 ? spec.sto_node1_s : spec.sto_node2_s;
    aspec.trajectory = node == 0 ? truth.sro_node1 : truth.sro_node2;
    aspec.sample_rate = fs;
    const auto& clean = node == 0 ? truth.clean1 : truth.clean2;
    auto async = apply_async_stft(clean, aspec, n_sim, b_sim);
    const size_t curve_frames = (total_samples - n_sim) / b_sim + 1;
    auto& curve = node == 0 ? truth.delay_node1 : truth.delay_node2;
    curve = accumulated_delay(aspec, curve_frames, n_sim, b_sim);

    // noise calibrated to the 3.2 m reference distance
    const auto& dists = node == 0 ? truth.dist_node1 : truth.dist_node2;
    double mean_dist = 0.0;
    for (double d : dists) mean_dist += d;
    mean_dist /= double(dists.size());
    const double scale = (mean_dist / 3.2) * (mean_dist / 3.2);
    double peak = 0.0;
    for (double v : clean) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw Error("generate_scenario: silent clean signal");
    double power = 0.0;
    size_t active = 0;
    for (double v : clean) {
      if (std::abs(v) > 1e-8 * peak) {
        power += v * v;
        ++active;
      }
    }
    power = power / double(active) * scale;  // power at the reference distance
    const double noise_std = std::sqrt(power / db_to_power(spec.snr_db));
    Rng noise_rng(Rng::derive_seed(spec.seed, 4 + size_t(node)));
    for (auto& v : async) v += noise_rng.normal(0.0, noise_std);
    (node == 0 ? pair.x1 : pair.x2) = std::move(async);
  }
  return {std::move(pair), std::move(truth)};
}

}  // namespace wasn
