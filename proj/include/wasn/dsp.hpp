#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "wasn/common.hpp"
#include "wasn/fft.hpp"

// Sign conventions, inherited by every estimator built on this module:
//  * A positive lag means the SECOND argument is delayed relative to the
//    first: y[n] == x[n - d] with d > 0 gives lag +d.
//  * lag_search follows the IFFT convention: a spectrum exp(+j 2pi k d / N)
//    peaks at lag -d.
//  * Integer-lag ties are broken toward smaller |lag|, then negative lag.

namespace wasn {

enum class Window { rectangular, hann, blackman };

inline std::vector<double> make_window(Window w, size_t n) {
  std::vector<double> win(n, 1.0);
  if (n < 2) return win;
  const double denom = static_cast<double>(n - 1);
  switch (w) {
    case Window::rectangular:
      break;
    case Window::hann:
      for (size_t i = 0; i < n; ++i)
        win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / denom);
      break;
    case Window::blackman:
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / denom;
        win[i] = 0.42 - 0.5 * std::cos(2.0 * kPi * t) + 0.08 * std::cos(4.0 * kPi * t);
      }
      break;
  }
  return win;
}

/// Frame-oriented complex spectra. Frame l covers input samples
/// [l*B, l*B + N); all N bins are kept (one-sided views are derived by
/// callers, never stored).
struct Spectrogram {
  std::vector<std::complex<double>> data;  // num_frames * fft_size, row-major
  size_t num_frames = 0;
  size_t fft_size = 0;     // N
  size_t frame_shift = 0;  // B
  Window window = Window::blackman;

  std::span<std::complex<double>> frame(size_t l) {
    return {data.data() + l * fft_size, fft_size};
  }
  std::span<const std::complex<double>> frame(size_t l) const {
    return {data.data() + l * fft_size, fft_size};
  }
};

inline Spectrogram stft(std::span<const double> signal, size_t fft_size, size_t frame_shift,
                        Window window) {
  if (!is_power_of_two(fft_size)) throw std::invalid_argument("stft: N must be a power of two");
  if (frame_shift == 0 || frame_shift > fft_size)
    throw std::invalid_argument("stft: require 0 < B <= N");
  if (signal.size() < fft_size) throw Error("stft: insufficient samples");

  Spectrogram spec;
  spec.fft_size = fft_size;
  spec.frame_shift = frame_shift;
  spec.window = window;
  spec.num_frames = (signal.size() - fft_size) / frame_shift + 1;
  spec.data.resize(spec.num_frames * fft_size);

  const std::vector<double> win = make_window(window, fft_size);
  std::vector<std::complex<double>> buf(fft_size);
  for (size_t l = 0; l < spec.num_frames; ++l) {
    const double* x = signal.data() + l * frame_shift;
    for (size_t n = 0; n < fft_size; ++n) buf[n] = {x[n] * win[n], 0.0};
    fft::detail::execute(buf, spec.frame(l), FFTW_FORWARD);
  }
  return spec;
}

/// Maximizes a unimodal objective on [a, b] by golden-section search.
/// The returned point is within tol of the true argmax.
template <typename F>
double golden_section_max(F&& objective, double a, double b, double tol) {
  if (!(a < b)) throw std::invalid_argument("golden_section_max: require a < b");
  if (!(tol > 0.0)) throw std::invalid_argument("golden_section_max: require tol > 0");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;  // 0.618...
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    }
  }
  return 0.5 * (a + b);
}

/// Result of a correlation-peak search over lags.
struct GccResult {
  long integer_lag = 0;
  double refined_lag = 0.0;    // |refined_lag - integer_lag| <= 0.5
  double peak_magnitude = 0.0;
  bool at_boundary = false;    // peak found at the edge of the search range
};

namespace detail {

// Visits integer lags 0, -1, +1, -2, +2, ... so that the first maximum found
// wins ties (smaller |lag| first, negative before positive).
template <typename F>
void for_each_lag(long halfwidth, F&& visit) {
  visit(0L);
  for (long m = 1; m <= halfwidth; ++m) {
    visit(-m);
    visit(m);
  }
}

}  // namespace detail

/// Finds the (fractional) lag maximizing the generalized cross-correlation
/// |IFFT{gcpsd}| within +-search_halfwidth. Negative lags address the
/// spectrum modulo N. Sub-sample refinement evaluates
/// |sum_k gcpsd(k) exp(+j 2pi k lag / N)| by golden-section search on
/// [peak-0.5, peak+0.5] to 1e-4 lag units.
inline GccResult lag_search(std::span<const std::complex<double>> gcpsd,
                            long search_halfwidth) {
  const size_t n = gcpsd.size();
  if (n == 0) throw std::invalid_argument("lag_search: empty spectrum");
  if (search_halfwidth < 0 || static_cast<size_t>(search_halfwidth) > n / 2)
    throw std::invalid_argument("lag_search: halfwidth out of range");

  double energy = 0.0;
  for (const auto& v : gcpsd) energy += std::norm(v);
  if (energy == 0.0) throw Error("lag_search: degenerate spectrum");

  const std::vector<std::complex<double>> corr = fft::inverse(gcpsd);
  GccResult result;
  double best = -1.0;
  detail::for_each_lag(search_halfwidth, [&](long lag) {
    const size_t idx = lag >= 0 ? static_cast<size_t>(lag) : n - static_cast<size_t>(-lag);
    const double mag = std::abs(corr[idx % n]);
    if (mag > best) {
      best = mag;
      result.integer_lag = lag;
    }
  });
  result.at_boundary = std::labs(result.integer_lag) == search_halfwidth && search_halfwidth > 0;

  // Sub-sample evaluation of sum_k gcpsd(k) exp(+j 2pi k lag / N). The two
  // natural continuations agree at integer lags but not between them:
  //  * conjugate-symmetric spectra (GCC of real signals) need signed bin
  //    frequencies (k > N/2 counts as k - N, Nyquist as a cosine) — the
  //    band-limited interpolation of the real correlation; the literal
  //    exponent would bias fractional peaks by up to half a lag;
  //  * one-sided/analytic spectra take the exponent literally.
  double asym = 0.0, sym_norm = 0.0;
  for (size_t k = 1; k < n; ++k) {
    asym += std::norm(gcpsd[k] - std::conj(gcpsd[n - k]));
    sym_norm += std::norm(gcpsd[k]);
  }
  const bool symmetric = asym <= 1e-12 * std::max(sym_norm, 1e-300);

  const long half = static_cast<long>(n) / 2;
  auto objective = [&](double lag) {
    const std::complex<double> w = std::polar(1.0, 2.0 * kPi * lag / static_cast<double>(n));
    std::complex<double> acc{0.0, 0.0};
    if (symmetric) {
      std::complex<double> rot = std::polar(
          1.0, 2.0 * kPi * static_cast<double>(-half + 1) * lag / static_cast<double>(n));
      for (long kk = -half + 1; kk < half; ++kk) {
        const size_t idx = kk >= 0 ? static_cast<size_t>(kk) : n - static_cast<size_t>(-kk);
        acc += gcpsd[idx] * rot;
        rot *= w;
      }
      if (n % 2 == 0) acc += gcpsd[static_cast<size_t>(half)] * std::cos(kPi * lag);
    } else {
      std::complex<double> rot{1.0, 0.0};
      for (size_t k = 0; k < n; ++k) {
        acc += gcpsd[k] * rot;
        rot *= w;
      }
    }
    return std::abs(acc) / static_cast<double>(n);
  };
  const double lo = static_cast<double>(result.integer_lag) - 0.5;
  const double hi = static_cast<double>(result.integer_lag) + 0.5;
  result.refined_lag = golden_section_max(objective, lo, hi, 1e-4);
  result.peak_magnitude = objective(result.refined_lag);
  if (result.peak_magnitude < best) {
    // integer peak was already the max (refinement bracket missed it)
    result.refined_lag = static_cast<double>(result.integer_lag);
    result.peak_magnitude = best;
  }
  return result;
}

/// Integer-lag peak of sum_n x[n]*y[n+lag] over lag in [-max_lag, max_lag],
/// computed via FFT (linear, zero-padded). Positive result: y is delayed
/// relative to x.
struct CorrelationPeak {
  long lag = 0;
  double peak = 0.0;
  bool at_boundary = false;
};

inline CorrelationPeak cross_correlate_offset(std::span<const double> x,
                                              std::span<const double> y, size_t max_lag) {
  if (x.empty() || y.empty()) throw std::invalid_argument("cross_correlate_offset: empty input");
  if (max_lag >= std::min(x.size(), y.size()))
    throw std::invalid_argument("cross_correlate_offset: max_lag too large");

  const size_t p = next_power_of_two(std::max(x.size(), y.size()) + max_lag + 1);
  std::vector<std::complex<double>> xa(p), ya(p);
  for (size_t i = 0; i < x.size(); ++i) xa[i] = {x[i], 0.0};
  for (size_t i = 0; i < y.size(); ++i) ya[i] = {y[i], 0.0};
  auto fx = fft::forward(xa);
  const auto fy = fft::forward(ya);
  for (size_t i = 0; i < p; ++i) fx[i] = std::conj(fx[i]) * fy[i];
  const auto corr = fft::inverse(fx);  // corr[m] = sum_n x[n] y[n+m], m mod p

  CorrelationPeak peak;
  double best = -1.0;
  detail::for_each_lag(static_cast<long>(max_lag), [&](long lag) {
    const size_t idx = lag >= 0 ? static_cast<size_t>(lag) : p - static_cast<size_t>(-lag);
    const double v = corr[idx].real();
    if (v > best) {
      best = v;
      peak.lag = lag;
    }
  });
  peak.peak = best;
  peak.at_boundary = std::labs(peak.lag) == static_cast<long>(max_lag) && max_lag > 0;

  double ex = 0.0, ey = 0.0;
  for (double v : x) ex += v * v;
  for (double v : y) ey += v * v;
  if (ex == 0.0 || ey == 0.0) throw Error("cross_correlate_offset: degenerate correlation");
  return peak;
}

/// GCC with phase transform: whitened cross-spectrum conj(FFT(a)) * FFT(b),
/// peak within +-max_lag, sub-sample refinement via golden-section search.
/// Positive refined_lag: b is delayed relative to a.
inline GccResult gcc_phat(std::span<const double> seg_a, std::span<const double> seg_b,
                          size_t max_lag) {
  if (seg_a.size() != seg_b.size())
    throw std::invalid_argument("gcc_phat: segment length mismatch");
  if (!is_power_of_two(seg_a.size()))
    throw std::invalid_argument("gcc_phat: length must be a power of two");
  if (mean_power(seg_a) == 0.0 || mean_power(seg_b) == 0.0)
    throw Error("gcc_phat: degenerate segment");

  const auto fa = fft::forward_real(seg_a);
  const auto fb = fft::forward_real(seg_b);
  std::vector<std::complex<double>> gcpsd(fa.size());
  for (size_t k = 0; k < fa.size(); ++k) {
    const std::complex<double> g = std::conj(fa[k]) * fb[k];
    gcpsd[k] = g / std::max(std::abs(g), 1e-12);
  }
  return lag_search(gcpsd, static_cast<long>(max_lag));
}

}  // namespace wasn
