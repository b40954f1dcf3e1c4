// Thin RAII layer over FFTW for whole-block spectral processing.
#pragma once

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "intradyne/types.hpp"

namespace intradyne::fft {

namespace detail {

// FFTW's planner is not reentrant; execution on distinct buffers is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  Plan(std::size_t n, int sign) : n_(n) {
    std::lock_guard lock(planner_mutex());
    buf_ = fftw_alloc_complex(n);
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, sign, FFTW_ESTIMATE);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buf_);
  }

  void execute(std::span<cplx> data) {
    std::copy(data.begin(), data.end(), reinterpret_cast<cplx*>(buf_));
    fftw_execute(plan_);
    const auto* out = reinterpret_cast<const cplx*>(buf_);
    std::copy(out, out + n_, data.begin());
  }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline Plan& cached_plan(std::size_t n, int sign) {
  thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<Plan>> cache;
  auto& slot = cache[{n, sign}];
  if (!slot) slot = std::make_unique<Plan>(n, sign);
  return *slot;
}

}  // namespace detail

/// In-place forward DFT, X[k] = sum_n x[n] exp(-i 2 pi k n / N).
inline void forward(std::span<cplx> x) {
  if (x.empty()) return;
  detail::cached_plan(x.size(), FFTW_FORWARD).execute(x);
}

/// In-place inverse DFT including the 1/N factor.
inline void inverse(std::span<cplx> x) {
  if (x.empty()) return;
  detail::cached_plan(x.size(), FFTW_BACKWARD).execute(x);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v *= scale;
}

inline std::vector<cplx> forward_copy(std::span<const cplx> x) {
  std::vector<cplx> out(x.begin(), x.end());
  forward(out);
  return out;
}

/// Signed frequency (Hz) of DFT bin k for an N-point transform.
inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  const auto ki = static_cast<long long>(k);
  const auto ni = static_cast<long long>(n);
  const long long signed_k = (ki <= (ni - 1) / 2) ? ki : ki - ni;
  return static_cast<double>(signed_k) * sample_rate / static_cast<double>(n);
}

}  // namespace intradyne::fft
