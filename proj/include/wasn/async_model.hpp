#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "wasn/common.hpp"
#include "wasn/dsp.hpp"
#include "wasn/random.hpp"
#include "wasn/sro_model.hpp"

namespace wasn {

/// Asynchronous sampling of one node: a sampling-time offset plus a
/// time-varying SRO trajectory.
struct AsyncSpec {
  double sto_seconds = 0.0;   // T_i, |T_i| <= 1 s
  SroTrajectory trajectory;   // ppm, one value per process step
  double sample_rate = 16000.0;

  void validate() const {
    if (std::abs(sto_seconds) > 1.0)
      throw std::invalid_argument("AsyncSpec: |sto_seconds| limited to 1 s");
    if (trajectory.values.empty()) throw std::invalid_argument("AsyncSpec: empty trajectory");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("AsyncSpec: sample_rate > 0");
  }
};

/// Accumulated per-frame delay, in samples:
///   delay[l] = -T*f_s + 1e-6 * (N/2 * eps[0] + sum_{1..l} eps[l~] * B).
/// The ppm-to-ratio conversion happens exactly once, here.
struct DelayCurve {
  std::vector<double> per_frame_delay;  // samples, frame l centered at l*B + N/2
  size_t frame_size = 0;                // N
  size_t frame_shift = 0;               // B

  /// Per-sample delay by linear interpolation between frame centers.
  /// Below the first center the curve ramps to the pure STO term at n=0;
  /// beyond the last center it continues with the final slope.
  double at_sample(double n) const {
    const auto& d = per_frame_delay;
    const double c0 = static_cast<double>(frame_size) / 2.0;
    const double b = static_cast<double>(frame_shift);
    if (d.empty()) throw Error("DelayCurve: empty");
    if (d.size() == 1) return d[0];
    if (n <= c0) {
      // slope below the first center: the first frame's SRO contribution
      const double slope = (d[1] - d[0]) / b;
      return d[0] - (c0 - n) * slope;
    }
    const double pos = (n - c0) / b;
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= d.size()) {
      const double slope = (d[d.size() - 1] - d[d.size() - 2]) / b;
      return d.back() + (n - (c0 + b * static_cast<double>(d.size() - 1))) * slope;
    }
    const double frac = pos - static_cast<double>(i);
    return d[i] * (1.0 - frac) + d[i + 1] * frac;
  }
};

inline DelayCurve accumulated_delay(const AsyncSpec& spec, size_t num_frames, size_t frame_size,
                                    size_t frame_shift) {
  spec.validate();
  if (num_frames == 0) throw std::invalid_argument("accumulated_delay: num_frames >= 1");
  const double step = spec.trajectory.step_duration;
  const double covered = (static_cast<double>(spec.trajectory.values.size()) - 1.0) * step;
  const double needed =
      static_cast<double>(num_frames - 1) * static_cast<double>(frame_shift) / spec.sample_rate;
  if (needed > covered + 1e-9) throw Error("accumulated_delay: trajectory too short");

  DelayCurve curve;
  curve.frame_size = frame_size;
  curve.frame_shift = frame_shift;
  curve.per_frame_delay.resize(num_frames);
  auto eps = [&](size_t l) {  // ppm at frame l
    return spec.trajectory.at_time(static_cast<double>(l * frame_shift) / spec.sample_rate);
  };
  double acc = -spec.sto_seconds * spec.sample_rate +
               1e-6 * eps(0) * static_cast<double>(frame_size) / 2.0;
  curve.per_frame_delay[0] = acc;
  for (size_t l = 1; l < num_frames; ++l) {
    acc += 1e-6 * eps(l) * static_cast<double>(frame_shift);
    curve.per_frame_delay[l] = acc;
  }
  return curve;
}

namespace detail {

inline double bessel_i0(double x) {
  // power series; converges fast for the argument range of Kaiser windows
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

}  // namespace detail

/// Windowed-sinc fractional interpolator (Kaiser window, 2*half_taps taps).
/// cutoff < 1 lowpasses for downsampling.
class SincInterpolator {
 public:
  explicit SincInterpolator(int half_taps = 32, double beta = 8.6, double cutoff = 1.0)
      : half_taps_(half_taps), cutoff_(cutoff) {
    const double norm = detail::bessel_i0(beta);
    table_.resize(kTableSize + 2);
    for (size_t i = 0; i < table_.size(); ++i) {
      const double t = static_cast<double>(i) / kTableSize;  // |t| in [0,1] of half width
      const double arg = 1.0 - t * t;
      table_[i] = arg > 0.0 ? detail::bessel_i0(beta * std::sqrt(arg)) / norm : 0.0;
    }
  }

  double window(double t) const {  // t in taps, |t| <= half_taps
    const double u = std::abs(t) / static_cast<double>(half_taps_);
    if (u >= 1.0) return 0.0;
    const double pos = u * kTableSize;
    const size_t i = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table_[i] * (1.0 - frac) + table_[i + 1] * frac;
  }

  /// Signal value at fractional position pos (samples); zero outside.
  double at(std::span<const double> x, double pos) const {
    const long base = static_cast<long>(std::floor(pos));
    const double frac = pos - static_cast<double>(base);
    double acc = 0.0;
    if (cutoff_ >= 1.0) {
      // sin(pi*(frac - k)) == sin(pi*frac) * (-1)^k : one sine per call
      const double s = std::sin(kPi * frac);
      for (long k = base - half_taps_ + 1; k <= base + half_taps_; ++k) {
        if (k < 0 || k >= static_cast<long>(x.size())) continue;
        const long off = k - base;  // tap index relative to base
        const double t = frac - static_cast<double>(off);
        double kern;
        if (std::abs(t) < 1e-9) {
          kern = 1.0;
        } else {
          const double sgn = (off % 2 == 0) ? 1.0 : -1.0;
          kern = s * sgn / (kPi * t);
        }
        acc += x[static_cast<size_t>(k)] * kern * window(t);
      }
    } else {
      for (long k = base - half_taps_ + 1; k <= base + half_taps_; ++k) {
        if (k < 0 || k >= static_cast<long>(x.size())) continue;
        const double t = frac - static_cast<double>(k - base);
        const double ct = cutoff_ * t;
        const double kern =
            std::abs(ct) < 1e-9 ? cutoff_ : cutoff_ * std::sin(kPi * ct) / (kPi * ct);
        acc += x[static_cast<size_t>(k)] * kern * window(t);
      }
    }
    return acc;
  }

 private:
  static constexpr size_t kTableSize = 8192;
  int half_taps_;
  double cutoff_;
  std::vector<double> table_;
};

/// Applies the asynchronous-sampling model in the STFT domain. Each frame's
/// accumulated delay is split into an integer part, applied by shifting the
/// analysis read position, and a sub-sample residual, applied by
/// multiplying bin k with exp(-j 2pi k f / N) on the lower half (conjugate
/// mirror above, cosine at Nyquist). Frames are resynthesized by weighted
/// overlap-add with the analysis window; the input is zero-extended at the
/// edges so every output sample has full window coverage, and the output
/// length equals the input length.
///
/// The phase model needs the delay to be near-constant within a frame; a
/// per-hop delay change above N/4 is rejected.
inline std::vector<double> apply_async_stft(std::span<const double> signal,
                                            const AsyncSpec& spec, size_t fft_size = 4096,
                                            size_t frame_shift = 1024) {
  spec.validate();
  if (!is_power_of_two(fft_size))
    throw std::invalid_argument("apply_async_stft: N must be a power of two");
  if (frame_shift == 0 || fft_size % frame_shift != 0)
    throw std::invalid_argument("apply_async_stft: B must divide N");
  if (signal.size() < fft_size) throw Error("apply_async_stft: insufficient samples");

  const size_t n = fft_size, b = frame_shift;
  const long len = static_cast<long>(signal.size());
  const size_t num_delay_frames = (signal.size() - n) / b + 1;
  const DelayCurve curve = accumulated_delay(spec, num_delay_frames, n, b);
  for (size_t l = 1; l < num_delay_frames; ++l) {
    if (std::abs(curve.per_frame_delay[l] - curve.per_frame_delay[l - 1]) >
        static_cast<double>(n) / 4.0)
      throw Error("apply_async_stft: shift exceeds model validity");
  }

  const std::vector<double> win = make_window(Window::blackman, n);
  const size_t padded_len = signal.size() + 2 * n;
  const size_t num_frames = (padded_len - n) / b + 1;
  std::vector<double> out(padded_len, 0.0), norm(padded_len, 0.0);
  std::vector<std::complex<double>> buf(n), shifted(n);
  const long frames_offset = static_cast<long>(n / b);

  for (size_t p = 0; p < num_frames; ++p) {
    const long l = std::clamp(static_cast<long>(p) - frames_offset, 0L,
                              static_cast<long>(num_delay_frames) - 1L);
    const double d = curve.per_frame_delay[static_cast<size_t>(l)];
    const long d_int = std::lround(d);
    const double f = d - static_cast<double>(d_int);

    // analysis slice in input coordinates, shifted by the integer delay
    const long start = static_cast<long>(p * b) - static_cast<long>(n) - d_int;
    for (size_t i = 0; i < n; ++i) {
      const long idx = start + static_cast<long>(i);
      const double v = (idx >= 0 && idx < len) ? signal[static_cast<size_t>(idx)] : 0.0;
      buf[i] = {v * win[i], 0.0};
    }
    fft::detail::execute(buf, shifted, FFTW_FORWARD);

    buf[0] = shifted[0];
    for (size_t k = 1; k < n / 2; ++k) {
      const double phase = -2.0 * kPi * static_cast<double>(k) * f / static_cast<double>(n);
      buf[k] = shifted[k] * std::complex<double>(std::cos(phase), std::sin(phase));
      buf[n - k] = std::conj(buf[k]);
    }
    buf[n / 2] = shifted[n / 2] * std::cos(kPi * f);
    fft::detail::execute(buf, shifted, FFTW_BACKWARD);

    double* o = out.data() + p * b;
    double* nm = norm.data() + p * b;
    const double scale = 1.0 / static_cast<double>(n);  // unnormalized inverse
    for (size_t i = 0; i < n; ++i) {
      o[i] += shifted[i].real() * scale * win[i];
      nm[i] += win[i] * win[i];
    }
  }

  std::vector<double> result(signal.size());
  for (size_t i = 0; i < result.size(); ++i) {
    const double w2 = norm[i + n];
    result[i] = w2 > 1e-12 ? out[i + n] / w2 : 0.0;
  }
  return result;
}

/// Time-domain oracle for the STFT resampler: evaluates
/// y(n - delay(n)) by windowed-sinc interpolation, with the per-sample
/// delay linearly interpolated from the accumulated frame delays.
inline std::vector<double> apply_async_sinc(std::span<const double> signal,
                                            const AsyncSpec& spec, size_t fft_size = 4096,
                                            size_t frame_shift = 1024) {
  spec.validate();
  if (signal.size() < fft_size) throw Error("apply_async_sinc: insufficient samples");
  const size_t num_frames = (signal.size() - fft_size) / frame_shift + 1;
  const DelayCurve curve = accumulated_delay(spec, num_frames, fft_size, frame_shift);
  const SincInterpolator interp;
  std::vector<double> out(signal.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double pos = static_cast<double>(i) - curve.at_sample(static_cast<double>(i));
    out[i] = interp.at(signal, pos);
  }
  return out;
}

/// Adds white Gaussian noise so that 10*log10(P_signal / P_noise) hits the
/// target, with P_signal measured over the active samples of `reference`.
/// An infinite target returns the signal unchanged.
inline std::vector<double> add_sensor_noise(std::span<const double> signal,
                                            double target_snr_db,
                                            std::span<const double> reference, uint64_t seed) {
  std::vector<double> out(signal.begin(), signal.end());
  if (std::isinf(target_snr_db) && target_snr_db > 0.0) return out;

  double peak = 0.0;
  for (double v : reference) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw Error("add_sensor_noise: zero-energy reference");
  const double gate = 1e-8 * peak;
  double power = 0.0;
  size_t active = 0;
  for (double v : reference) {
    if (std::abs(v) > gate) {
      power += v * v;
      ++active;
    }
  }
  power /= static_cast<double>(active);
  const double noise_std = std::sqrt(power / db_to_power(target_snr_db));
  Rng rng(seed);
  for (auto& v : out) v += rng.normal(0.0, noise_std);
  return out;
}

}  // namespace wasn
