#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace wasn::fft {

namespace detail {

// FFTW plan creation is not thread safe; execution through a plan's own
// buffers is serialized per thread by giving each thread its own cache.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plan {
  fftw_plan plan = nullptr;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  size_t n = 0;

  Plan(size_t size, int sign) : n(size) {
    in = fftw_alloc_complex(size);
    out = fftw_alloc_complex(size);
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(size), in, out, sign, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
};

inline Plan& cached_plan(size_t n, int sign) {
  thread_local std::map<std::pair<size_t, int>, std::unique_ptr<Plan>> cache;
  auto& slot = cache[{n, sign}];
  if (!slot) slot = std::make_unique<Plan>(n, sign);
  return *slot;
}

inline void execute(std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out, int sign) {
  if (in.size() != out.size()) throw std::invalid_argument("fft: size mismatch");
  if (in.empty()) return;
  Plan& p = cached_plan(in.size(), sign);
  for (size_t i = 0; i < in.size(); ++i) {
    p.in[i][0] = in[i].real();
    p.in[i][1] = in[i].imag();
  }
  fftw_execute(p.plan);
  for (size_t i = 0; i < out.size(); ++i) out[i] = {p.out[i][0], p.out[i][1]};
}

}  // namespace detail

/// Forward complex DFT, unnormalized.
inline std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> y(x.size());
  detail::execute(x, y, FFTW_FORWARD);
  return y;
}

/// Inverse complex DFT, normalized by 1/N (forward ∘ inverse == identity).
inline std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> y(x.size());
  detail::execute(x, y, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : y) v *= scale;
  return y;
}

/// Forward DFT of a real signal.
inline std::vector<std::complex<double>> forward_real(std::span<const double> x) {
  std::vector<std::complex<double>> cx(x.size());
  for (size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
  return forward(cx);
}

}  // namespace wasn::fft
