// Polarization-diversity 90-degree hybrid and the four balanced receivers.
//
// Everything is expressed in shot-noise units at complex baseband relative to
// the LO. LO power, responsivity and hybrid insertion loss are folded into the
// SNU calibration; `raw_gain` maps SNU^(1/2) to raw detector units so that the
// calibration stage has real work to do.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "intradyne/fft.hpp"
#include "intradyne/random.hpp"
#include "intradyne/types.hpp"

namespace intradyne {

struct RxConfig {
  double pol_extinction_db = 20.0;
  double quantum_clearance_db = 20.0;
  double quantum_bandwidth = 360e6;  // Hz; 0 disables the detector roll-off
  double pilot_receiver_noise = 1.0;  // SNU per quadrature
  double quantum_efficiency = 0.68;
  double pilot_efficiency = 0.76;
  double adc_rate = 0.0;  // Hz; 0 samples at the simulation rate
  std::size_t block_size_samples = 1u << 16;
  double cmrr_db = 40.0;
  double raw_gain = 1.0;
  double pilot_power_ceiling = 0.0;  // SNU per arm; 0 disables the warning
  double snu_bandwidth = 250e6;  // Hz; band over which shot noise integrates to 1 SNU

  /// Per-sample vacuum variance of white noise that carries 1 SNU in snu_bandwidth.
  double vacuum_unit(double sample_rate) const { return sample_rate / (2.0 * snu_bandwidth); }

  /// Electronic noise of the quantum receivers in SNU per quadrature.
  double quantum_electronic_noise() const { return std::pow(10.0, -quantum_clearance_db / 10.0); }

  void validate() const {
    if (pol_extinction_db < 0 || quantum_clearance_db < 0 || cmrr_db < 0)
      throw config_error("rx dB values must be >= 0");
    if (!(quantum_efficiency > 0 && quantum_efficiency <= 1) ||
        !(pilot_efficiency > 0 && pilot_efficiency <= 1))
      throw config_error("rx efficiencies must lie in (0, 1]");
    if (quantum_bandwidth < 0) throw config_error("rx.quantum_bandwidth must be >= 0");
    if (pilot_receiver_noise < 0) throw config_error("rx.pilot_receiver_noise must be >= 0");
    if (adc_rate < 0) throw config_error("rx.adc_rate must be >= 0");
    if (block_size_samples == 0) throw config_error("rx.block_size_samples must be positive");
    if (!(raw_gain > 0)) throw config_error("rx.raw_gain must be positive");
    if (!(snu_bandwidth > 0)) throw config_error("rx.snu_bandwidth must be positive");
  }
};

struct MeasurementRecord {
  std::vector<double> quantum_I, quantum_Q, pilot_I, pilot_Q;
  double sample_rate = 0.0;
  std::optional<double> snu_scale;  // sqrt(N0) once calibrated
  std::string config_snapshot = "{}";  // JSON text
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return quantum_I.size(); }

  void validate() const {
    const auto n = quantum_I.size();
    if (quantum_Q.size() != n || pilot_I.size() != n || pilot_Q.size() != n)
      throw config_error("MeasurementRecord: stream lengths differ");
  }
};

/// First-order crosstalk of the polarization splitter, symmetric in both directions.
inline DualPolFrame hybrid_split(const DualPolFrame& frame, double extinction_db) {
  const double eps = db_to_amplitude(extinction_db);
  DualPolFrame out = frame;
  if (eps == 0.0) return out;
  for (std::size_t n = 0; n < frame.quantum.size(); ++n) {
    out.quantum.samples[n] = frame.quantum.samples[n] + eps * frame.pilot.samples[n];
    out.pilot.samples[n] = frame.pilot.samples[n] + eps * frame.quantum.samples[n];
  }
  return out;
}

struct QuadraturePair {
  std::vector<double> I, Q;
};

/// Simultaneous I/Q measurement: the 50/50 split and efficiency scale the field
/// by sqrt(eta/2); each arm adds unit vacuum noise (when the LO is on) plus
/// electronic noise. `unit` is the per-sample variance of one SNU; it exceeds
/// 1 when the simulation band is wider than the shot-noise reference band.
inline QuadraturePair dual_quadrature_detect(const IQTrace& tributary, double eta,
                                             double noise_snu_per_quad, Rng& rng,
                                             bool lo_on = true, double unit = 1.0) {
  const double a = std::sqrt(eta / 2.0);
  const double var = unit * ((lo_on ? 1.0 : 0.0) + noise_snu_per_quad);
  std::normal_distribution<double> noise(0.0, std::sqrt(var));
  QuadraturePair out;
  out.I.resize(tributary.size());
  out.Q.resize(tributary.size());
  for (std::size_t n = 0; n < tributary.size(); ++n) {
    const double ni = var > 0 ? noise(rng) : 0.0;
    const double nq = var > 0 ? noise(rng) : 0.0;
    out.I[n] = a * tributary.samples[n].real() + ni;
    out.Q[n] = a * tributary.samples[n].imag() + nq;
  }
  return out;
}

/// Detected optical power per arm, used as the common-mode envelope.
inline std::vector<double> power_envelope(const IQTrace& tributary, double eta) {
  std::vector<double> env(tributary.size());
  for (std::size_t n = 0; n < env.size(); ++n) env[n] = 0.5 * eta * std::norm(tributary.samples[n]);
  return env;
}

inline std::vector<double> cmrr_leakage(std::vector<double> x, const std::vector<double>& envelope,
                                        double cmrr_db) {
  if (x.size() != envelope.size()) throw config_error("cmrr_leakage: length mismatch");
  const double k = db_to_amplitude(cmrr_db);
  if (k == 0.0) return x;
  for (std::size_t n = 0; n < x.size(); ++n) x[n] += k * envelope[n];
  return x;
}

/// Zero-phase single-pole magnitude roll-off |H| = 1/sqrt(1 + (f/fc)^2).
inline void detector_rolloff(QuadraturePair& q, double sample_rate, double bandwidth) {
  if (bandwidth <= 0.0 || q.I.empty()) return;
  const std::size_t n = q.I.size();
  std::vector<cplx> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = {q.I[k], q.Q[k]};
  fft::forward(z);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = fft::bin_frequency(k, n, sample_rate) / bandwidth;
    z[k] /= std::sqrt(1.0 + f * f);
  }
  fft::inverse(z);
  for (std::size_t k = 0; k < n; ++k) {
    q.I[k] = z[k].real();
    q.Q[k] = z[k].imag();
  }
}

/// Uniform resampling by linear interpolation; identity at equal rates.
inline std::vector<double> resample_uniform(const std::vector<double>& x, double rate_in, double rate_out) {
  if (rate_out == rate_in || x.empty()) return x;
  const double step = rate_in / rate_out;
  const auto n_out = static_cast<std::size_t>(std::floor((static_cast<double>(x.size()) - 1) / step)) + 1;
  std::vector<double> y(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double pos = static_cast<double>(k) * step;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    y[k] = (i + 1 < x.size()) ? x[i] * (1 - frac) + x[i + 1] * frac : x[i];
  }
  return y;
}

inline double adc_rate_for(const RxConfig& cfg, double sample_rate) {
  return cfg.adc_rate > 0 ? cfg.adc_rate : sample_rate;
}

/// Samples the simulation must provide to fill one block at the ADC rate.
inline std::size_t required_input_samples(const RxConfig& cfg, double sample_rate) {
  const double ratio = sample_rate / adc_rate_for(cfg, sample_rate);
  return static_cast<std::size_t>(std::ceil(static_cast<double>(cfg.block_size_samples - 1) * ratio)) + 1;
}

inline double symbols_per_block(std::size_t block_size, double adc_rate, double symbol_rate) {
  return static_cast<double>(block_size) * symbol_rate / adc_rate;
}

namespace detail {

inline void finish_stream(std::vector<double>& v, double fs, double adc, std::size_t block,
                          double gain) {
  v = resample_uniform(v, fs, adc);
  v.resize(block);
  for (auto& x : v) x *= gain;
}

}  // namespace detail

/// hybrid -> detection -> CMRR -> detector roll-off -> resampling -> block.
inline MeasurementRecord acquire_block(const DualPolFrame& frame, const RxConfig& cfg, Rng& rng) {
  cfg.validate();
  frame.validate();
  const double fs = frame.quantum.sample_rate;
  const double adc = adc_rate_for(cfg, fs);
  const std::size_t need = required_input_samples(cfg, fs);
  if (frame.quantum.size() < need)
    throw config_error("acquire_block: frame has " + std::to_string(frame.quantum.size()) +
                       " samples, block needs " + std::to_string(need));

  const DualPolFrame mixed = hybrid_split(frame, cfg.pol_extinction_db);
  const double unit = cfg.vacuum_unit(fs);
  auto q = dual_quadrature_detect(mixed.quantum, cfg.quantum_efficiency,
                                  cfg.quantum_electronic_noise(), rng, true, unit);
  auto p = dual_quadrature_detect(mixed.pilot, cfg.pilot_efficiency, cfg.pilot_receiver_noise, rng,
                                  true, unit);

  const auto qenv = power_envelope(mixed.quantum, cfg.quantum_efficiency);
  const auto penv = power_envelope(mixed.pilot, cfg.pilot_efficiency);
  q.I = cmrr_leakage(std::move(q.I), qenv, cfg.cmrr_db);
  q.Q = cmrr_leakage(std::move(q.Q), qenv, cfg.cmrr_db);
  p.I = cmrr_leakage(std::move(p.I), penv, cfg.cmrr_db);
  p.Q = cmrr_leakage(std::move(p.Q), penv, cfg.cmrr_db);
  detector_rolloff(q, fs, cfg.quantum_bandwidth);

  MeasurementRecord rec;
  rec.sample_rate = adc;
  rec.quantum_I = std::move(q.I);
  rec.quantum_Q = std::move(q.Q);
  rec.pilot_I = std::move(p.I);
  rec.pilot_Q = std::move(p.Q);
  for (auto* v : {&rec.quantum_I, &rec.quantum_Q, &rec.pilot_I, &rec.pilot_Q})
    detail::finish_stream(*v, fs, adc, cfg.block_size_samples, cfg.raw_gain);

  if (cfg.pilot_power_ceiling > 0) {
    double mean_env = 0;
    for (double e : penv) mean_env += e;
    mean_env /= static_cast<double>(penv.size());
    if (mean_env > cfg.pilot_power_ceiling)
      rec.warnings.push_back("pilot power exceeds configured detector ceiling");
  }
  return rec;
}

enum class CalibrationKind { shot_noise, electronic_noise };

/// Quantum-receiver output with the signal blocked: LO on (shot noise plus
/// electronics) or LO off (electronics only). Raw units, after roll-off.
inline QuadraturePair acquire_calibration(const RxConfig& cfg, double sample_rate, CalibrationKind kind,
                                          std::size_t n_samples, Rng& rng) {
  cfg.validate();
  IQTrace vacuum;
  vacuum.sample_rate = sample_rate;
  vacuum.samples.assign(n_samples, cplx{});
  auto q = dual_quadrature_detect(vacuum, cfg.quantum_efficiency, cfg.quantum_electronic_noise(), rng,
                                  kind == CalibrationKind::shot_noise, cfg.vacuum_unit(sample_rate));
  detector_rolloff(q, sample_rate, cfg.quantum_bandwidth);
  const double adc = adc_rate_for(cfg, sample_rate);
  for (auto* v : {&q.I, &q.Q}) {
    *v = resample_uniform(*v, sample_rate, adc);
    for (auto& x : *v) x *= cfg.raw_gain;
  }
  return q;
}

}  // namespace intradyne
