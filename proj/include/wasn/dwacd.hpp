#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "wasn/async_model.hpp"
#include "wasn/common.hpp"
#include "wasn/dsp.hpp"
#include "wasn/sad.hpp"
#include "wasn/sro_model.hpp"

namespace wasn {

/// Parameters of the coherence-drift SRO estimator.
struct DwacdParams {
  size_t frame_shift = 1 << 9;      // B: Welch frame shift inside a segment
  size_t fft_size = 1 << 12;        // N
  size_t segment_shift = 1 << 11;   // B_s: one SRO estimate every B_s samples
  size_t segment_len = 1 << 13;     // N_W
  size_t temporal_distance = 4;     // l_d: product spans l_d * B_s samples
  double smoothing = 0.95;          // alpha
  size_t settling_segments = 40;    // estimates only for l >= 40
  double coarse_sync_window_s = 20.0;
  double max_sro_ppm = 250.0;       // GCC search range for the readout
  double sample_rate = 16000.0;
  // energy SAD gating
  size_t sad_frame_size = 4096;
  size_t sad_frame_shift = 512;
  double sad_threshold_db = 10.0;
  double sad_min_ratio = 0.75;

  size_t welch_frames() const {
    return (segment_len - fft_size + frame_shift) / frame_shift;
  }
  long readout_halfwidth() const {
    const double lags = max_sro_ppm * 1e-6 *
                        static_cast<double>(temporal_distance * segment_shift);
    return std::max(1L, std::lround(lags));
  }

  void validate() const {
    if (!is_power_of_two(fft_size)) throw std::invalid_argument("DwacdParams: N power of two");
    if (frame_shift == 0 || frame_shift > fft_size)
      throw std::invalid_argument("DwacdParams: 0 < B <= N");
    if (segment_len < fft_size) throw std::invalid_argument("DwacdParams: N_W >= N");
    if (!(smoothing > 0.0 && smoothing < 1.0))
      throw std::invalid_argument("DwacdParams: 0 < alpha < 1");
    if (temporal_distance == 0) throw std::invalid_argument("DwacdParams: l_d >= 1");
  }
};

/// Recursive estimator state.
struct DwacdState {
  std::vector<std::complex<double>> smoothed_product;  // P_bar, N bins, init 0
  long comp_shift = 0;        // tau_comp: integer read offset into x2
  double last_sro_ppm = 0.0;  // eps_hat[l-1]
  long segment_index = 0;
  long coarse_offset = 0;
  double delay_acc = 0.0;     // accumulated delay estimate, samples
  bool settled = false;
};

struct SroTracePoint {
  long segment_index = 0;
  double time_s = 0.0;
  double sro_ppm = 0.0;
  bool valid = false;  // post-settling and SAD-passed
};

struct SroReadout {
  double sro_ppm = 0.0;
  bool at_boundary = false;  // estimate saturated at the search edge
};

/// Whole-sample offset between the streams, measured over the first
/// coarse_sync_window_s of detected source activity. The returned offset is
/// added to every x2 read position afterwards.
inline long coarse_sync(std::span<const double> x1, std::span<const double> x2,
                        const ActivityMask& mask, const DwacdParams& params) {
  size_t first_active = SIZE_MAX;
  double active_s = 0.0;
  size_t end_frame = 0;
  const double frame_s = static_cast<double>(mask.frame_shift) / params.sample_rate;
  for (size_t l = 0; l < mask.num_frames(); ++l) {
    if (!mask.frame_flags[l]) continue;
    if (first_active == SIZE_MAX) first_active = l;
    active_s += frame_s;
    end_frame = l;
    if (active_s >= params.coarse_sync_window_s) break;
  }
  if (first_active == SIZE_MAX || active_s < params.coarse_sync_window_s)
    throw Error("coarse_sync: coarse sync unavailable (insufficient activity)");

  const size_t start = first_active * mask.frame_shift;
  const size_t end =
      std::min({end_frame * mask.frame_shift + mask.frame_size, x1.size(), x2.size()});
  const size_t max_lag = static_cast<size_t>(std::ceil(1.1 * params.sample_rate));
  if (end <= start + max_lag + 1) throw Error("coarse_sync: window too short");
  const auto peak = cross_correlate_offset(x1.subspan(start, end - start),
                                           x2.subspan(start, end - start), max_lag);
  if (peak.at_boundary) throw Error("coarse_sync: offset at search boundary");
  return peak.lag;
}

/// Segment coherence Gamma(k) = Phi12 / sqrt(Phi11 * Phi22) via Welch
/// averaging of Blackman-windowed frames. Each frame kappa of the second
/// segment is rotated by exp(+j 2pi k/N kappa B eps_prev) (signed bin
/// frequency) to undo the intra-segment drift predicted by the previous
/// SRO estimate.
inline std::vector<std::complex<double>> estimate_coherence(std::span<const double> seg1,
                                                            std::span<const double> seg2,
                                                            double prev_sro_ppm,
                                                            const DwacdParams& params) {
  if (seg1.size() != params.segment_len || seg2.size() != params.segment_len)
    throw std::invalid_argument("estimate_coherence: segments must have length N_W");
  const size_t n = params.fft_size;
  const auto s1 = stft(seg1, n, params.frame_shift, Window::blackman);
  const auto s2 = stft(seg2, n, params.frame_shift, Window::blackman);
  const size_t nu = s1.num_frames;  // nu_W

  std::vector<std::complex<double>> cross(n, {0.0, 0.0});
  std::vector<double> auto1(n, 0.0), auto2(n, 0.0);
  const double eps = prev_sro_ppm * 1e-6;
  const long half = static_cast<long>(n) / 2;
  for (size_t kappa = 0; kappa < nu; ++kappa) {
    const auto f1 = s1.frame(kappa);
    const auto f2 = s2.frame(kappa);
    const double step =
        2.0 * kPi / static_cast<double>(n) * static_cast<double>(kappa * params.frame_shift) * eps;
    for (size_t k = 0; k < n; ++k) {
      const long kk = static_cast<long>(k) <= half ? static_cast<long>(k)
                                                   : static_cast<long>(k) - static_cast<long>(n);
      const std::complex<double> rot{std::cos(step * static_cast<double>(kk)),
                                     std::sin(step * static_cast<double>(kk))};
      const std::complex<double> y2 = f2[k] * rot;
      cross[k] += f1[k] * std::conj(y2);
      auto1[k] += std::norm(f1[k]);
      auto2[k] += std::norm(y2);
    }
  }
  double mean_psd = 0.0;
  for (size_t k = 0; k < n; ++k) mean_psd += auto1[k] + auto2[k];
  mean_psd /= static_cast<double>(2 * n) * static_cast<double>(nu);
  const double floor_val = 1e-12 * std::max(mean_psd, 1e-300);

  std::vector<std::complex<double>> coh(n);
  const double inv_nu = 1.0 / static_cast<double>(nu);
  for (size_t k = 0; k < n; ++k) {
    const double den = std::sqrt(auto1[k] * inv_nu * auto2[k] * inv_nu);
    coh[k] = cross[k] * inv_nu / std::max(den, floor_val);
  }
  return coh;
}

/// Conjugated product of two coherence spectra taken l_d segments apart.
inline std::vector<std::complex<double>> coherence_product(
    std::span<const std::complex<double>> now, std::span<const std::complex<double>> past) {
  if (now.size() != past.size())
    throw std::invalid_argument("coherence_product: spectrum size mismatch");
  std::vector<std::complex<double>> p(now.size());
  for (size_t k = 0; k < now.size(); ++k) p[k] = now[k] * std::conj(past[k]);
  return p;
}

/// Autoregressive update of the smoothed product; gated segments leave the
/// state untouched.
inline void update_smoothed(DwacdState& state, std::span<const std::complex<double>> product,
                            bool gate, const DwacdParams& params) {
  if (state.smoothed_product.empty())
    state.smoothed_product.assign(product.size(), {0.0, 0.0});
  if (!gate) return;
  const double a = params.smoothing;
  for (size_t k = 0; k < product.size(); ++k)
    state.smoothed_product[k] = a * state.smoothed_product[k] + (1.0 - a) * product[k];
}

/// SRO readout: eps = -lag / (l_d * B_s), with the GCC peak searched within
/// the ppm range of the parameter set.
inline SroReadout sro_from_smoothed(std::span<const std::complex<double>> smoothed,
                                    const DwacdParams& params) {
  double energy = 0.0;
  for (const auto& v : smoothed) energy += std::norm(v);
  if (energy == 0.0) throw Error("sro_from_smoothed: not settled");
  const auto res = lag_search(smoothed, params.readout_halfwidth());
  SroReadout out;
  out.sro_ppm = -res.refined_lag /
                static_cast<double>(params.temporal_distance * params.segment_shift) * 1e6;
  out.at_boundary = res.at_boundary;
  return out;
}

struct DwacdResult {
  std::vector<SroTracePoint> trace;  // one point per segment shift
  long coarse_offset = 0;
  DwacdState state;
};

/// Runs the full online estimator over a stream pair: coarse sync, then per
/// segment coherence product, gated smoothing and GCC readout. Estimates
/// before the settling segment are back-filled with the first settled value
/// (valid = false) so delay reconstruction can integrate the whole trace.
inline DwacdResult run_dwacd(std::span<const double> x1, std::span<const double> x2,
                             const DwacdParams& params) {
  params.validate();
  const size_t nw = params.segment_len, bs = params.segment_shift;
  const size_t ld = params.temporal_distance;
  if (x1.size() < nw + ld * bs || x2.size() < nw)
    throw Error("run_dwacd: input too short");

  const auto mask1 = detect_activity(x1, params.sad_frame_size, params.sad_frame_shift,
                                     params.sad_threshold_db);
  const auto mask2 = detect_activity(x2, params.sad_frame_size, params.sad_frame_shift,
                                     params.sad_threshold_db);
  DwacdResult result;
  result.coarse_offset = coarse_sync(x1, x2, mask1, params);

  DwacdState& st = result.state;
  st.coarse_offset = result.coarse_offset;
  st.smoothed_product.assign(params.fft_size, {0.0, 0.0});

  const size_t mask1_cover = (mask1.num_frames() - 1) * mask1.frame_shift + mask1.frame_size;
  const size_t mask2_cover = (mask2.num_frames() - 1) * mask2.frame_shift + mask2.frame_size;
  auto active1 = [&](long start) {
    return start >= 0 && static_cast<size_t>(start) + nw <= mask1_cover &&
           segment_is_active(mask1, static_cast<size_t>(start), nw, params.sad_min_ratio);
  };
  auto active2 = [&](long start) {
    return start >= 0 && static_cast<size_t>(start) + nw <= mask2_cover &&
           segment_is_active(mask2, static_cast<size_t>(start), nw, params.sad_min_ratio);
  };
  auto in_range = [&](std::span<const double> x, long start) {
    return start >= 0 && static_cast<size_t>(start) + nw <= x.size();
  };

  for (long l = 0;; ++l) {
    const long start1 = l * static_cast<long>(bs);
    if (!in_range(x1, start1)) break;
    st.segment_index = l;
    st.comp_shift = std::lround(st.delay_acc);
    const long start2 = start1 + st.coarse_offset + st.comp_shift;
    const long past1 = start1 - static_cast<long>(ld * bs);
    const long past2 = start2 - static_cast<long>(ld * bs);

    bool gate = l >= static_cast<long>(ld) && in_range(x1, past1) && in_range(x2, start2) &&
                in_range(x2, past2);
    if (gate) {
      gate = active1(start1) && active1(past1) && active2(start2) && active2(past2);
    }
    if (gate) {
      const auto now = estimate_coherence(x1.subspan(static_cast<size_t>(start1), nw),
                                          x2.subspan(static_cast<size_t>(start2), nw),
                                          st.last_sro_ppm, params);
      const auto past = estimate_coherence(x1.subspan(static_cast<size_t>(past1), nw),
                                           x2.subspan(static_cast<size_t>(past2), nw),
                                           st.last_sro_ppm, params);
      auto product = coherence_product(now, past);
      // conjugate symmetry keeps the readout IFFT real
      const size_t n = product.size();
      for (size_t k = 1; k < n - k; ++k) {
        const std::complex<double> sym =
            0.5 * (product[k] + std::conj(product[n - k]));
        product[k] = sym;
        product[n - k] = std::conj(sym);
      }
      product[0] = {product[0].real(), 0.0};
      if (n % 2 == 0) product[n / 2] = {product[n / 2].real(), 0.0};
      update_smoothed(st, product, true, params);
    }

    SroTracePoint point;
    point.segment_index = l;
    point.time_s = (static_cast<double>(l) * static_cast<double>(bs) +
                    static_cast<double>(nw) / 2.0) /
                   params.sample_rate;
    if (l >= static_cast<long>(params.settling_segments)) {
      double psum = 0.0;
      for (const auto& v : st.smoothed_product) psum += std::norm(v);
      if (!st.settled && psum > 0.0) {
        const auto readout = sro_from_smoothed(st.smoothed_product, params);
        st.settled = true;
        st.last_sro_ppm = readout.sro_ppm;
        // back-fill the settling segments and account their delay
        st.delay_acc = readout.sro_ppm * 1e-6 *
                       (static_cast<double>(nw) / 2.0 +
                        static_cast<double>(l) * static_cast<double>(bs));
        for (auto& p : result.trace) p.sro_ppm = readout.sro_ppm;
        point.sro_ppm = readout.sro_ppm;
        point.valid = gate;
      } else if (st.settled) {
        const double est =
            gate ? sro_from_smoothed(st.smoothed_product, params).sro_ppm : st.last_sro_ppm;
        st.last_sro_ppm = est;
        st.delay_acc += static_cast<double>(bs) * est * 1e-6;
        point.sro_ppm = est;
        point.valid = gate;
      }
    }
    result.trace.push_back(point);
  }
  return result;
}

/// Trace as a trajectory (ppm per segment shift), for replaying through the
/// resampler or exporting.
inline SroTrajectory trace_to_trajectory(const std::vector<SroTracePoint>& trace,
                                         const DwacdParams& params) {
  if (trace.empty()) throw Error("trace_to_trajectory: empty trace");
  SroTrajectory traj;
  traj.step_duration = static_cast<double>(params.segment_shift) / params.sample_rate;
  traj.values.reserve(trace.size());
  for (const auto& p : trace) traj.values.push_back(p.sro_ppm);
  return traj;
}

/// Resamples x2 with the negated estimate trace, removing the estimated SRO
/// drift while leaving the STO in place.
inline std::vector<double> compensate_sro(std::span<const double> x2,
                                          const std::vector<SroTracePoint>& trace,
                                          const DwacdParams& params) {
  AsyncSpec spec;
  spec.sto_seconds = 0.0;
  spec.sample_rate = params.sample_rate;
  spec.trajectory = trace_to_trajectory(trace, params);
  for (auto& v : spec.trajectory.values) v = -v;
  // pad so the trajectory covers the stream
  const size_t needed =
      x2.size() / params.segment_shift + 4;
  if (spec.trajectory.values.size() < needed)
    spec.trajectory.values.resize(needed, spec.trajectory.values.back());
  return apply_async_stft(x2, spec);
}

}  // namespace wasn
