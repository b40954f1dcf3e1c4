// Composes transmitter, channel, receiver, DSP and estimation into runs,
// sweeps and suppression A/B comparisons.
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "intradyne/channel.hpp"
#include "intradyne/config.hpp"
#include "intradyne/dsp.hpp"
#include "intradyne/estimation.hpp"
#include "intradyne/random.hpp"
#include "intradyne/receiver.hpp"
#include "intradyne/wavegen.hpp"

namespace intradyne {

/// Run f(i) for i in [0, n) on up to `threads` workers. Results must be
/// written by index so the outcome does not depend on scheduling. The first
/// exception (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Receiver transfer factors

/// Signal and noise factors of the detector roll-off plus DSP low-pass.
/// signal_gain: symbol-center amplitude gain for the configured pulse.
/// noise_factor: filtered shot-noise variance in SNU (1 for a flat receiver
/// whose low-pass matches the SNU reference band).
struct ReceiverTransfer {
  double signal_gain = 1.0;
  double noise_factor = 1.0;

  /// Transmittance seen at the symbol decisions per unit channel transmittance.
  double power_ratio(double eta) const { return eta * signal_gain * signal_gain / noise_factor; }
};

inline ReceiverTransfer receiver_transfer(const TxConfig& tx, const RxConfig& rx, const DspConfig& dsp) {
  ReceiverTransfer out;
  const double fs = tx.sample_rate();
  const auto period = prbs_symbol_period(tx.prbs_seed);
  TxConfig unit = tx;
  unit.v_mod = 0.5;
  const std::size_t reps = 8;
  IQTrace w = carve_pulses_periodic(period.symbols, unit, reps);
  QuadraturePair q;
  for (const auto& s : w.samples) {
    q.I.push_back(s.real());
    q.Q.push_back(s.imag());
  }
  detector_rolloff(q, fs, rx.quantum_bandwidth);
  const IQTrace f = lowpass_quantum(q.I, q.Q, fs, dsp);
  cplx cross{};
  double energy = 0;
  for (std::size_t k = 0; k < period.symbols.size() * reps; ++k) {
    const std::size_t n = k * static_cast<std::size_t>(tx.samples_per_symbol) + symbol_center_offset(tx);
    const cplx s = period.symbols[k % period.symbols.size()];
    cross += f.samples[n] * std::conj(s);
    energy += std::norm(s);
  }
  out.signal_gain = std::abs(cross / energy);

  // White noise of per-sample variance vacuum_unit through the same filters.
  const std::size_t n = w.size();
  double acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double fr = fft::bin_frequency(k, n, fs);
    if (std::abs(fr) > dsp.lpf_cutoff) continue;
    const double h2 = rx.quantum_bandwidth > 0 ? 1.0 / (1.0 + (fr / rx.quantum_bandwidth) * (fr / rx.quantum_bandwidth)) : 1.0;
    acc += h2;
  }
  out.noise_factor = rx.vacuum_unit(fs) * acc / static_cast<double>(n);
  return out;
}

/// Channel transmittance to configure, and the transmittance expected at the
/// symbol decisions.
struct LinkPlan {
  double channel_T = 1.0;
  double expected_T = 1.0;
};

inline LinkPlan plan_link(const ExperimentConfig& cfg) {
  const auto tr = receiver_transfer(cfg.tx, cfg.rx, cfg.dsp);
  const double ratio = tr.power_ratio(cfg.rx.quantum_efficiency);
  LinkPlan p;
  if (cfg.transmittance_reference == "receiver") {
    p.expected_T = *cfg.ch.transmittance;
    p.channel_T = p.expected_T / ratio;
    if (p.channel_T > 1)
      throw config_error("receiver-referred transmittance " + std::to_string(p.expected_T) +
                         " needs channel transmittance > 1");
  } else {
    p.channel_T = cfg.ch.effective_transmittance();
    p.expected_T = p.channel_T * ratio;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationResult {
  CalibrationSet set;
  double n0_averaged = 0.0;
  double xi_det_averaged = 0.0;
  double n0_worst = 0.0;
  double xi_det_worst = 0.0;
};

/// Variance of one calibration trace after the same low-pass the data sees.
inline double calibration_variance(const ExperimentConfig& cfg, CalibrationKind kind, std::size_t index) {
  const double fs = cfg.tx.sample_rate();
  const double adc = adc_rate_for(cfg.rx, fs);
  const std::size_t n_adc = cfg.cal.samples_per_measurement ? cfg.cal.samples_per_measurement
                                                            : cfg.rx.block_size_samples;
  RxConfig rx = cfg.rx;
  rx.block_size_samples = n_adc;
  const std::size_t n_in = required_input_samples(rx, fs);
  auto rng = make_rng(cfg.seed,
                      kind == CalibrationKind::shot_noise ? streams::shot_calibration : streams::elec_calibration,
                      index);
  auto q = acquire_calibration(cfg.rx, fs, kind, n_in, rng);
  q.I.resize(n_adc);
  q.Q.resize(n_adc);
  const IQTrace f = lowpass_quantum(q.I, q.Q, adc, cfg.dsp);
  std::vector<double> i(f.size()), qq(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    i[k] = f.samples[k].real();
    qq[k] = f.samples[k].imag();
  }
  return quadrature_variance(i, qq);
}

inline CalibrationResult calibrate(const ExperimentConfig& cfg) {
  cfg.validate();
  CalibrationResult r;
  const std::size_t ns = cfg.cal.shot_measurements, ne = cfg.cal.elec_measurements;
  std::vector<double> v(ns + ne);
  parallel_for(ns + ne, cfg.threads, [&](std::size_t i) {
    v[i] = i < ns ? calibration_variance(cfg, CalibrationKind::shot_noise, i)
                  : calibration_variance(cfg, CalibrationKind::electronic_noise, i - ns);
  });
  r.set.shot_variances.assign(v.begin(), v.begin() + static_cast<long long>(ns));
  r.set.elec_variances.assign(v.begin() + static_cast<long long>(ns), v.end());
  const auto avg = normalization(r.set, CalibrationPolicy::averaged);
  const auto worst = normalization(r.set, CalibrationPolicy::worst_case);
  r.n0_averaged = avg.n0;
  r.xi_det_averaged = 2 * avg.xi_det_prime();
  r.n0_worst = worst.n0;
  r.xi_det_worst = 2 * worst.xi_det_prime();
  return r;
}

// ---------------------------------------------------------------------------
// Data blocks

struct BlockResult {
  FrameStatistics stats;
  long long true_delay = 0;  // modulo the PRBS period, in ADC samples
  long long est_delay = 0;
  double freq_offset_est = 0.0;
  double pilot_snr_db = 0.0;
  double peak_ratio = 0.0;
  double symbol_error_ratio = 0.0;
  std::vector<std::string> warnings;
};

/// Artifacts kept for the first blocks of a run.
struct BlockArtifacts {
  MeasurementRecord record;
  DspResult dsp;
};

struct BlockContext {
  ExperimentConfig cfg;
  LinkPlan link;
  DualPolFrame tx_frame;
  long long period_samples = 0;  // PRBS period at the simulation rate
};

inline BlockContext make_block_context(const ExperimentConfig& cfg) {
  BlockContext c;
  c.cfg = cfg;
  c.link = plan_link(cfg);
  const double fs = cfg.tx.sample_rate();
  c.tx_frame = synthesize_transmitter(cfg.tx, required_input_samples(cfg.rx, fs));
  c.period_samples = static_cast<long long>(prbs7_period) * cfg.tx.samples_per_symbol;
  return c;
}

inline long long block_delay(const BlockContext& c, std::size_t block) {
  if (!c.cfg.random_delay) return c.cfg.ch.delay_samples;
  auto rng = make_rng(c.cfg.seed, streams::delay, block);
  std::uniform_int_distribution<long long> d(0, c.period_samples - 1);
  return d(rng);
}

inline BlockResult run_block(const BlockContext& c, std::size_t block, BlockArtifacts* keep = nullptr) {
  const auto& cfg = c.cfg;
  const double fs = cfg.tx.sample_rate();
  ChannelConfig ch = cfg.ch;
  ch.transmittance = c.link.channel_T;
  ch.delay_samples = block_delay(c, block);

  auto rng_ch = make_rng(cfg.seed, streams::channel, block);
  auto rng_rx = make_rng(cfg.seed, streams::receiver, block);
  auto frame = apply_channel(c.tx_frame, ch, cfg.tx.pilot_freq, cfg.rx.quantum_efficiency, rng_ch,
                             cfg.rx.vacuum_unit(fs));
  auto rec = acquire_block(frame, cfg.rx, rng_rx);
  rec.seed = derive_seed(cfg.seed, streams::receiver, block);
  auto dsp = process_record(rec, cfg.tx, cfg.dsp);

  BlockResult r;
  r.stats = frame_statistics(dsp.frame);
  const double decim = fs / rec.sample_rate;
  const auto period_adc = static_cast<long long>(std::llround(static_cast<double>(c.period_samples) / decim));
  r.true_delay = static_cast<long long>(std::llround(static_cast<double>(ch.delay_samples) / decim)) % period_adc;
  r.est_delay = dsp.delay;
  r.freq_offset_est = dsp.track.freq_offset;
  r.pilot_snr_db = dsp.pilot_snr_db;
  r.peak_ratio = dsp.peak_ratio;
  r.symbol_error_ratio = symbol_error_ratio(dsp.frame);
  r.warnings = rec.warnings;
  if (keep) {
    rec.config_snapshot = to_json(cfg).dump();
    keep->record = std::move(rec);
    keep->dsp = std::move(dsp);
  }
  return r;
}

struct ExperimentResult {
  std::string label;
  CalibrationResult calibration;
  LinkPlan link;
  std::optional<EstimationReport> report;  // absent for calibration-only runs
  std::vector<BlockResult> blocks;
  std::vector<BlockArtifacts> artifacts;   // first blocks, see OutputOptions
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.label = cfg.label;
  res.calibration = calibrate(cfg);
  res.link = plan_link(cfg);
  if (cfg.blocks == 0) return res;

  const BlockContext ctx = make_block_context(cfg);
  const std::size_t n_keep = std::min(
      cfg.blocks, std::max<std::size_t>(cfg.out.records, (cfg.out.symbols || cfg.out.phase_track) ? 1 : 0));
  res.blocks.resize(cfg.blocks);
  res.artifacts.resize(n_keep);
  parallel_for(cfg.blocks, cfg.threads, [&](std::size_t b) {
    res.blocks[b] = run_block(ctx, b, b < n_keep ? &res.artifacts[b] : nullptr);
  });

  FrameStatistics pooled;
  std::vector<std::string> warnings;
  for (const auto& b : res.blocks) {
    pooled += b.stats;
    for (const auto& w : b.warnings)
      if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
  }
  auto report = build_report(pooled, res.calibration.set, cfg.trusted_receiver,
                             NominalLink{res.link.expected_T, cfg.tx.v_mod});
  report.label = cfg.label;
  report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
  res.report = std::move(report);
  return res;
}

struct SweepPoint {
  double value = 0.0;
  ExperimentResult result;
};

/// One run per value with the same master seed, so points are paired.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                                         const std::vector<double>& values) {
  const auto path = resolve_axis(cfg, axis);
  std::vector<SweepPoint> out;
  for (double v : values) {
    auto c = with_axis_value(cfg, path, v);
    c.label = cfg.label + ":" + path + "=" + format_number(v);
    out.push_back({v, run_experiment(c)});
  }
  return out;
}

inline std::vector<SweepPoint> run_ab_suppression(const ExperimentConfig& cfg, const std::vector<double>& values) {
  if (values.size() < 2) throw config_error("ab-suppression needs at least two suppression values");
  return run_sweep(cfg, "tx.carrier_suppression_db", values);
}

}  // namespace intradyne
