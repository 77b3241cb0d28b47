#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wasn/common.hpp"

namespace wasn {

/// Frame-wise source-activity flags from energy thresholding.
struct ActivityMask {
  std::vector<bool> frame_flags;
  size_t frame_size = 0;
  size_t frame_shift = 0;
  double threshold_db = 10.0;  // relative to the adaptive noise floor

  size_t num_frames() const { return frame_flags.size(); }
};

/// Energy-based source activity detection: a frame is active iff its energy
/// (dB) exceeds the noise floor plus threshold_db. The floor is the 10th
/// percentile of frame energies, capped at peak - 2*threshold_db so that
/// always-active signals (no silence to estimate a floor from) stay active.
inline ActivityMask detect_activity(std::span<const double> signal, size_t frame_size = 4096,
                                    size_t frame_shift = 512, double threshold_db = 10.0) {
  if (frame_size == 0) throw std::invalid_argument("detect_activity: frame_size > 0");
  if (frame_shift == 0) throw std::invalid_argument("detect_activity: frame_shift > 0");
  if (signal.empty()) throw Error("detect_activity: empty signal");

  ActivityMask mask;
  mask.frame_size = frame_size;
  mask.frame_shift = frame_shift;
  mask.threshold_db = threshold_db;
  if (signal.size() < frame_size) {
    mask.frame_flags.assign(1, mean_power(signal) > 0.0);
    return mask;
  }
  const size_t num_frames = (signal.size() - frame_size) / frame_shift + 1;
  std::vector<double> energy(num_frames);
  double peak = 0.0;
  for (size_t l = 0; l < num_frames; ++l) {
    energy[l] = mean_power(signal.subspan(l * frame_shift, frame_size));
    peak = std::max(peak, energy[l]);
  }
  mask.frame_flags.assign(num_frames, false);
  if (peak == 0.0) return mask;  // all-zero signal: all inactive

  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  const double p10 = sorted[num_frames / 10];
  const double floor_db =
      std::min(power_to_db(std::max(p10, 1e-300)), power_to_db(peak) - 2.0 * threshold_db);
  const double gate_db = floor_db + threshold_db;
  for (size_t l = 0; l < num_frames; ++l)
    mask.frame_flags[l] = energy[l] > 0.0 && power_to_db(energy[l]) > gate_db;
  return mask;
}

/// True iff at least min_ratio of the frames overlapping
/// [start, start+length) are active.
inline bool segment_is_active(const ActivityMask& mask, size_t start, size_t length,
                              double min_ratio = 0.75) {
  if (mask.frame_flags.empty()) throw std::invalid_argument("segment_is_active: empty mask");
  const size_t covered = (mask.num_frames() - 1) * mask.frame_shift + mask.frame_size;
  if (start + length > covered)
    throw std::invalid_argument("segment_is_active: segment out of mask range");
  // frames [l*shift, l*shift + frame_size) intersecting the segment
  const size_t end = start + length;
  const size_t first =
      start >= mask.frame_size ? (start - mask.frame_size) / mask.frame_shift + 1 : 0;
  size_t total = 0, active = 0;
  for (size_t l = first; l < mask.num_frames() && l * mask.frame_shift < end; ++l) {
    ++total;
    if (mask.frame_flags[l]) ++active;
  }
  if (total == 0) return false;
  return double(active) >= min_ratio * double(total);
}

}  // namespace wasn
