// Transmitter: PRBS7-driven QPSK quantum tributary and single-sideband pilot,
// polarization multiplexed and power leveled, at complex baseband.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "intradyne/types.hpp"

namespace intradyne {

enum class PulseShape { rectangular, raised_cosine_rz, nyquist_raised_cosine };

inline std::string_view to_string(PulseShape p) {
  switch (p) {
    case PulseShape::rectangular: return "rectangular";
    case PulseShape::raised_cosine_rz: return "raised_cosine_rz";
    case PulseShape::nyquist_raised_cosine: return "nyquist_raised_cosine";
  }
  return "?";
}

inline PulseShape pulse_shape_from_string(std::string_view s) {
  if (s == "rectangular") return PulseShape::rectangular;
  if (s == "raised_cosine_rz" || s == "raised-cosine-RZ") return PulseShape::raised_cosine_rz;
  if (s == "nyquist_raised_cosine") return PulseShape::nyquist_raised_cosine;
  throw config_error("unknown pulse_shape '" + std::string(s) +
                     "' (rectangular, raised_cosine_rz, nyquist_raised_cosine)");
}

struct TxConfig {
  double symbol_rate = 250e6;
  double pilot_freq = 1e9;
  int samples_per_symbol = 16;
  double v_mod = 3.7;  // SNU, per quadrature at the symbol center
  double pilot_amplitude = 1.0;
  double pilot_to_quantum_db = 23.0;  // -inf switches the pilot off
  double carrier_suppression_db = 20.0;
  double sideband_suppression_db = 20.0;
  double qpsk_mod_index = 0.94;
  double pilot_mod_index = 0.76;
  std::uint32_t prbs_seed = 0x7f;
  PulseShape pulse_shape = PulseShape::nyquist_raised_cosine;
  int nyquist_span_symbols = 12;  // one-sided truncation of the Nyquist pulse

  double sample_rate() const { return samples_per_symbol * symbol_rate; }
  bool pilot_enabled() const { return !(std::isinf(pilot_to_quantum_db) && pilot_to_quantum_db < 0); }

  void validate() const {
    if (!(symbol_rate > 0)) throw config_error("tx.symbol_rate must be positive");
    if (samples_per_symbol < 4) throw config_error("tx.samples_per_symbol must be >= 4");
    if (!(v_mod > 0)) throw config_error("tx.v_mod must be positive");
    if (!(pilot_freq > 0) || pilot_freq >= sample_rate() / 2)
      throw config_error("tx.pilot_freq must lie in (0, sample_rate/2)");
    if (carrier_suppression_db < 0 || sideband_suppression_db < 0)
      throw config_error("tx suppression values must be >= 0 dB");
    if (prbs_seed == 0 || prbs_seed > 0x7f) throw config_error("tx.prbs_seed must be a nonzero 7-bit value");
    if (nyquist_span_symbols < 1) throw config_error("tx.nyquist_span_symbols must be >= 1");
  }
};

inline constexpr std::size_t prbs7_period = 127;

/// Fibonacci LFSR for x^7 + x^6 + 1, output repeated/truncated to `length`.
inline std::vector<std::uint8_t> prbs7_sequence(std::uint32_t seed, std::size_t length) {
  if ((seed & 0x7f) == 0) throw config_error("prbs7: zero seed locks the LFSR");
  std::uint32_t state = seed & 0x7f;
  std::vector<std::uint8_t> out(length);
  for (auto& bit : out) {
    const std::uint32_t fb = ((state >> 6) ^ (state >> 5)) & 1u;
    state = ((state << 1) | fb) & 0x7f;
    bit = static_cast<std::uint8_t>(fb);
  }
  return out;
}

/// Gray mapping: first bit selects the sign of I, second the sign of Q.
inline cplx qpsk_point(std::uint8_t index) {
  const double a = 1.0 / std::sqrt(2.0);
  return {(index & 2u) ? -a : a, (index & 1u) ? -a : a};
}

inline std::uint8_t qpsk_decide(cplx s) {
  return static_cast<std::uint8_t>((s.real() < 0 ? 2u : 0u) | (s.imag() < 0 ? 1u : 0u));
}

struct QpskMapping {
  std::vector<cplx> symbols;
  std::vector<std::uint8_t> indices;
  bool padded = false;  // odd input: a trailing 0 bit was appended
};

inline QpskMapping qpsk_map(const std::vector<std::uint8_t>& bits) {
  QpskMapping m;
  m.padded = bits.size() % 2 != 0;
  const std::size_t n = (bits.size() + 1) / 2;
  m.symbols.reserve(n);
  m.indices.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t b0 = bits[2 * k] & 1u;
    const std::uint8_t b1 = (2 * k + 1 < bits.size()) ? (bits[2 * k + 1] & 1u) : 0u;
    const auto idx = static_cast<std::uint8_t>((b0 << 1) | b1);
    m.indices.push_back(idx);
    m.symbols.push_back(qpsk_point(idx));
  }
  return m;
}

/// The repeating transmitted symbol period: 254 PRBS bits mapped to 127 symbols.
inline QpskMapping prbs_symbol_period(std::uint32_t seed) {
  return qpsk_map(prbs7_sequence(seed, 2 * prbs7_period));
}

/// Sample index (within a symbol slot) carrying the symbol center.
inline int symbol_center_offset(const TxConfig& cfg) { return cfg.samples_per_symbol / 2; }

/// Pulse value at offset x (in symbol periods) from the symbol center.
inline double pulse_value(PulseShape shape, double x) {
  switch (shape) {
    case PulseShape::rectangular:
      return (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
    case PulseShape::raised_cosine_rz: {
      if (x < -0.5 || x >= 0.5) return 0.0;
      const double c = std::cos(pi * x);
      return c * c;
    }
    case PulseShape::nyquist_raised_cosine: {
      // Full-rolloff raised cosine: zero ISI, band-limited to the symbol rate.
      const double den = 1.0 - 4.0 * x * x;
      if (std::abs(den) < 1e-12) return 0.5;
      const double sinc = (x == 0.0) ? 1.0 : std::sin(pi * x) / (pi * x);
      return sinc * std::cos(pi * x) / den;
    }
  }
  return 0.0;
}

namespace detail {

inline IQTrace carve(const std::vector<cplx>& symbols, const TxConfig& cfg, std::size_t repeats,
                     bool periodic) {
  const int sps = cfg.samples_per_symbol;
  const std::size_t nsym = symbols.size() * repeats;
  const std::size_t n = nsym * static_cast<std::size_t>(sps);
  const double amp = std::sqrt(2.0 * cfg.v_mod);
  const int center = symbol_center_offset(cfg);
  IQTrace out;
  out.sample_rate = cfg.sample_rate();
  out.samples.assign(n, cplx{});

  const int span = cfg.pulse_shape == PulseShape::nyquist_raised_cosine
                       ? cfg.nyquist_span_symbols * sps
                       : sps / 2;
  std::vector<double> taps(2 * static_cast<std::size_t>(span) + 1);
  for (int j = -span; j <= span; ++j)
    taps[static_cast<std::size_t>(j + span)] =
        pulse_value(cfg.pulse_shape, static_cast<double>(j) / sps);

  const auto ln = static_cast<long long>(n);
  for (std::size_t k = 0; k < nsym; ++k) {
    const cplx a = amp * symbols[k % symbols.size()];
    const long long c = static_cast<long long>(k) * sps + center;
    for (int j = -span; j <= span; ++j) {
      const double t = taps[static_cast<std::size_t>(j + span)];
      if (t == 0.0) continue;
      long long idx = c + j;
      if (periodic) {
        idx %= ln;
        if (idx < 0) idx += ln;
      } else if (idx < 0 || idx >= ln) {
        continue;
      }
      out.samples[static_cast<std::size_t>(idx)] += a * t;
    }
  }
  return out;
}

}  // namespace detail

/// Pulse-carve a symbol sequence. The symbol-center sample of slot k sits at
/// k*sps + sps/2 and carries sqrt(2 v_mod) * symbol, so each quadrature has
/// variance v_mod there. qpsk_mod_index is absorbed into v_mod.
inline IQTrace carve_pulses(const std::vector<cplx>& symbols, const TxConfig& cfg) {
  if (symbols.empty()) throw config_error("carve_pulses: no symbols");
  return detail::carve(symbols, cfg, 1, false);
}

/// Same as carve_pulses for a sequence repeated `repeats` times, with pulse
/// tails wrapped so the trace is exactly periodic.
inline IQTrace carve_pulses_periodic(const std::vector<cplx>& period, const TxConfig& cfg,
                                     std::size_t repeats) {
  if (period.empty() || repeats == 0) throw config_error("carve_pulses_periodic: empty input");
  return detail::carve(period, cfg, repeats, true);
}

/// oCS-SSB pilot: upper sideband at f_P plus residual carrier and image sideband.
inline IQTrace synth_pilot(const TxConfig& cfg, std::size_t n_samples) {
  if (n_samples == 0) throw config_error("synth_pilot: n_samples must be positive");
  const double fs = cfg.sample_rate();
  if (cfg.pilot_freq >= fs / 2) throw config_error("synth_pilot: pilot frequency at or above Nyquist");
  const double a = cfg.pilot_amplitude * cfg.pilot_mod_index;
  const double carrier = a * db_to_amplitude(cfg.carrier_suppression_db);
  const double image = a * db_to_amplitude(cfg.sideband_suppression_db);
  IQTrace out;
  out.sample_rate = fs;
  out.samples.resize(n_samples);
  const double w = two_pi * cfg.pilot_freq / fs;
  for (std::size_t n = 0; n < n_samples; ++n) {
    // Reduce the phase argument to keep long traces accurate.
    const double ph = std::fmod(w * static_cast<double>(n), two_pi);
    const cplx rot = std::polar(1.0, ph);
    out.samples[n] = a * rot + carrier + image * std::conj(rot);
  }
  return out;
}

/// Scale the quantum tributary so that P_pilot / P_quantum hits the requested
/// ratio. A silent pilot or quantum tributary is passed through unscaled.
inline DualPolFrame polmux_combine(IQTrace quantum, IQTrace pilot, double pilot_to_quantum_power_db) {
  if (quantum.size() != pilot.size() || quantum.sample_rate != pilot.sample_rate)
    throw config_error("polmux_combine: tributaries differ in length or rate");
  const double pq = mean_power(quantum.samples);
  const double pp = mean_power(pilot.samples);
  if (pq > 0 && pp > 0 && std::isfinite(pilot_to_quantum_power_db)) {
    const double scale = std::sqrt(pp / (db_to_power_ratio(pilot_to_quantum_power_db) * pq));
    for (auto& s : quantum.samples) s *= scale;
  }
  return DualPolFrame{std::move(quantum), std::move(pilot)};
}

/// Total mean power of both polarizations (they do not interfere).
inline double frame_mean_power(const DualPolFrame& f) {
  return mean_power(f.quantum.samples) + mean_power(f.pilot.samples);
}

/// Full transmitter for `n_samples` or more samples: an integer number of
/// PRBS periods, so the waveform is exactly periodic with 127*sps samples.
inline DualPolFrame synthesize_transmitter(const TxConfig& cfg, std::size_t n_samples) {
  cfg.validate();
  const auto period = prbs_symbol_period(cfg.prbs_seed);
  const std::size_t period_samples = prbs7_period * static_cast<std::size_t>(cfg.samples_per_symbol);
  const std::size_t repeats = (n_samples + period_samples - 1) / period_samples;
  IQTrace quantum = carve_pulses_periodic(period.symbols, cfg, repeats);
  IQTrace pilot;
  if (cfg.pilot_enabled()) {
    pilot = synth_pilot(cfg, quantum.size());
    const double pp = mean_power(pilot.samples);
    const double pq = mean_power(quantum.samples);
    if (pp > 0) {
      const double lvl = std::sqrt(db_to_power_ratio(cfg.pilot_to_quantum_db) * pq / pp);
      for (auto& s : pilot.samples) s *= lvl;
    }
  } else {
    pilot.sample_rate = quantum.sample_rate;
    pilot.samples.assign(quantum.size(), cplx{});
  }
  return polmux_combine(std::move(quantum), std::move(pilot), cfg.pilot_to_quantum_db);
}

}  // namespace intradyne
