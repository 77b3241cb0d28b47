#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wasn {

inline constexpr double kPi = 3.14159265358979323846;

/// Runtime failures of the processing chain (degenerate inputs, missing
/// data, estimation impossible). Argument/contract violations use
/// std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double power_to_db(double p) { return 10.0 * std::log10(p); }
inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

inline double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

inline double rms(std::span<const double> x) { return std::sqrt(mean_power(x)); }

/// Root-mean-square of (a - b), normalized by rms(a). Both spans must have
/// equal length.
inline double rms_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rms_relative_error: length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    num += d * d;
    den += a[i] * a[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

inline bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_power_of_two(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace wasn
