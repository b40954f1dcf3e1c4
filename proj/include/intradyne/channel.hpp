// Fibre channel and laser impairments applied to both polarizations.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "intradyne/random.hpp"
#include "intradyne/types.hpp"

namespace intradyne {

struct ChannelConfig {
  /// Direct transmittance; when unset it follows from the fibre length.
  std::optional<double> transmittance;
  double fibre_length_km = 0.0;
  double attenuation_db_per_km = 0.2;
  double freq_offset = 0.0;         // Hz, transmitter minus LO
  double combined_linewidth = 0.0;  // Hz, transmitter + LO Wiener phase noise
  double injected_excess_noise = 0.0;  // SNU, receiver referred
  long long delay_samples = 0;

  double effective_transmittance() const {
    if (transmittance) return *transmittance;
    return std::pow(10.0, -fibre_length_km * attenuation_db_per_km / 10.0);
  }

  void validate() const {
    const double t = effective_transmittance();
    if (!(t > 0.0 && t <= 1.0)) throw config_error("channel transmittance must lie in (0, 1]");
    if (fibre_length_km < 0 || attenuation_db_per_km < 0)
      throw config_error("channel fibre length and attenuation must be >= 0");
    if (combined_linewidth < 0) throw config_error("channel.combined_linewidth must be >= 0");
    if (injected_excess_noise < 0) throw config_error("channel.injected_excess_noise must be >= 0");
    if (delay_samples < 0) throw config_error("channel.delay_samples must be >= 0");
  }
};

inline DualPolFrame apply_loss(DualPolFrame frame, double transmittance) {
  if (!(transmittance > 0.0 && transmittance <= 1.0))
    throw config_error("apply_loss: transmittance must lie in (0, 1]");
  const double a = std::sqrt(transmittance);
  for (auto& s : frame.quantum.samples) s *= a;
  for (auto& s : frame.pilot.samples) s *= a;
  return frame;
}

/// Multiply both tributaries by exp(i*phase[n]).
inline DualPolFrame apply_phase_path(DualPolFrame frame, std::span<const double> phase) {
  if (phase.size() != frame.quantum.size() || phase.size() != frame.pilot.size())
    throw config_error("apply_phase_path: phase path length mismatch");
  for (std::size_t n = 0; n < phase.size(); ++n) {
    const cplx r = std::polar(1.0, phase[n]);
    frame.quantum.samples[n] *= r;
    frame.pilot.samples[n] *= r;
  }
  return frame;
}

/// Wiener phase path with increment variance 2*pi*linewidth/fs, starting at 0.
inline std::vector<double> wiener_phase_path(std::size_t n, double linewidth, double sample_rate,
                                             Rng& rng) {
  std::vector<double> phi(n, 0.0);
  if (linewidth <= 0.0 || n == 0) return phi;
  std::normal_distribution<double> step(0.0, std::sqrt(two_pi * linewidth / sample_rate));
  for (std::size_t k = 1; k < n; ++k) phi[k] = phi[k - 1] + step(rng);
  return phi;
}

/// Shared-laser phase noise: one realization drives both polarizations.
inline DualPolFrame apply_phase_noise(DualPolFrame frame, double linewidth, Rng& rng) {
  if (linewidth < 0) throw config_error("apply_phase_noise: negative linewidth");
  if (linewidth == 0.0) return frame;
  const auto phi = wiener_phase_path(frame.quantum.size(), linewidth, frame.quantum.sample_rate, rng);
  return apply_phase_path(std::move(frame), phi);
}

/// Largest representable offset keeps pilot + offset below Nyquist.
inline void check_frequency_offset(double df, double sample_rate, double pilot_freq) {
  if (std::abs(df) >= sample_rate / 2 - pilot_freq)
    throw config_error("frequency offset would alias the pilot beyond Nyquist");
}

inline DualPolFrame apply_frequency_offset(DualPolFrame frame, double df, double pilot_freq) {
  const double fs = frame.quantum.sample_rate;
  check_frequency_offset(df, fs, pilot_freq);
  if (df == 0.0) return frame;
  const double w = two_pi * df / fs;
  for (std::size_t n = 0; n < frame.quantum.size(); ++n) {
    const double t = frame.quantum.t0 * fs + static_cast<double>(n);
    const cplx r = std::polar(1.0, std::fmod(w * t, two_pi));
    frame.quantum.samples[n] *= r;
    frame.pilot.samples[n] *= r;
  }
  return frame;
}

/// Add circular Gaussian noise with variance `xi_per_quadrature` in each
/// quadrature of the quantum tributary. Before the receiver's 50/50 I/Q split
/// this is exactly xi in the receiver-referred excess-noise convention.
inline DualPolFrame inject_excess_noise(DualPolFrame frame, double xi_per_quadrature, Rng& rng) {
  if (xi_per_quadrature < 0) throw config_error("inject_excess_noise: negative variance");
  if (xi_per_quadrature == 0.0) return frame;
  std::normal_distribution<double> n(0.0, std::sqrt(xi_per_quadrature));
  for (auto& s : frame.quantum.samples) {
    const double re = n(rng);
    const double im = n(rng);
    s += cplx{re, im};
  }
  return frame;
}

/// Delay of a periodic transmission: circular shift by d samples.
inline DualPolFrame apply_delay(DualPolFrame frame, long long d) {
  if (d < 0) throw config_error("apply_delay: negative delay");
  const auto n = static_cast<long long>(frame.quantum.size());
  if (n == 0 || d % n == 0) return frame;
  const auto shift = static_cast<std::size_t>(d % n);
  auto rotate = [shift](std::vector<cplx>& v) {
    std::rotate(v.rbegin(), v.rbegin() + static_cast<long long>(shift), v.rend());
  };
  rotate(frame.quantum.samples);
  rotate(frame.pilot.samples);
  return frame;
}

/// Channel pipeline: delay, loss, excess noise, then the laser processes.
/// `detector_efficiency` refers the injected noise to the detector output;
/// `noise_unit` is the per-sample variance of one SNU (see RxConfig::vacuum_unit).
inline DualPolFrame apply_channel(DualPolFrame frame, const ChannelConfig& cfg, double pilot_freq,
                                  double detector_efficiency, Rng& rng, double noise_unit = 1.0) {
  cfg.validate();
  frame = apply_delay(std::move(frame), cfg.delay_samples);
  frame = apply_loss(std::move(frame), cfg.effective_transmittance());
  frame = inject_excess_noise(std::move(frame),
                              noise_unit * cfg.injected_excess_noise / detector_efficiency, rng);
  frame = apply_phase_noise(std::move(frame), cfg.combined_linewidth, rng);
  frame = apply_frequency_offset(std::move(frame), cfg.freq_offset, pilot_freq);
  return frame;
}

}  // namespace intradyne
