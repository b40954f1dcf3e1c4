// Core value types shared by every stage of the link simulator.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace intradyne {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Rejected configuration or precondition violation (CLI exit code 2).
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Timing recovery could not find an unambiguous PRBS correlation peak (exit code 3).
class sync_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shot-noise calibration produced a non-positive N0 (exit code 4).
class calibration_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pilot tone too weak to recover frequency and phase.
class pilot_lost_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Amplitude factor for a power ratio in dB; +inf dB maps to exactly 0.
inline double db_to_amplitude(double db) {
  if (std::isinf(db) && db > 0) return 0.0;
  return std::pow(10.0, -db / 20.0);
}

inline double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }

/// Uniformly sampled complex-baseband waveform. Quadrature units: SNU^(1/2).
struct IQTrace {
  std::vector<cplx> samples;
  double sample_rate = 0.0;
  double t0 = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  double time(std::size_t n) const noexcept { return t0 + static_cast<double>(n) / sample_rate; }

  void validate() const {
    if (samples.empty()) throw config_error("IQTrace: empty trace");
    if (!(sample_rate > 0.0)) throw config_error("IQTrace: sample_rate must be positive");
    for (const auto& s : samples)
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
        throw config_error("IQTrace: non-finite sample");
  }
};

/// Orthogonally polarized tributaries sharing one sample clock.
struct DualPolFrame {
  IQTrace quantum;
  IQTrace pilot;

  void validate() const {
    quantum.validate();
    pilot.validate();
    if (quantum.size() != pilot.size())
      throw config_error("DualPolFrame: tributary lengths differ");
    if (quantum.sample_rate != pilot.sample_rate)
      throw config_error("DualPolFrame: tributary sample rates differ");
  }
};

/// Symbol-rate samples with the data-aided reference attached.
/// tx_symbols holds the Gray constellation index (0..3) of what was sent,
/// prbs_position the symbol's slot within the repeating PRBS period.
struct SymbolFrame {
  std::vector<cplx> symbols;
  std::vector<std::uint8_t> tx_symbols;
  std::vector<std::uint32_t> prbs_position;
  double symbol_rate = 0.0;

  std::size_t size() const noexcept { return symbols.size(); }
};

/// Shortest round-trip-stable text for reports: printf %.10g.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

template <class Range>
double mean_power(const Range& r) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& x : r) {
    acc += std::norm(x);
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace intradyne
