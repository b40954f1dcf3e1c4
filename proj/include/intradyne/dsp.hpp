// Offline block DSP: spectral conditioning, pilot-based frequency and phase
// recovery, fourth-power residual phase alignment and PRBS clock recovery.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intradyne/fft.hpp"
#include "intradyne/receiver.hpp"
#include "intradyne/types.hpp"
#include "intradyne/wavegen.hpp"

namespace intradyne {

enum class FilterKind { brickwall, windowed_fir };

inline std::string_view to_string(FilterKind k) {
  return k == FilterKind::brickwall ? "brickwall" : "windowed_fir";
}

inline FilterKind filter_kind_from_string(std::string_view s) {
  if (s == "brickwall" || s == "freq-domain-brickwall") return FilterKind::brickwall;
  if (s == "windowed_fir" || s == "windowed-FIR") return FilterKind::windowed_fir;
  throw config_error("unknown filter_kind '" + std::string(s) + "' (brickwall, windowed_fir)");
}

struct DspConfig {
  double lpf_cutoff = 250e6;
  double bpf_center = 0.0;  // Hz; 0 uses the transmitter's pilot frequency
  double bpf_fwhm = 4e6;
  double pilot_search_span = 25e6;  // half-width of the coarse pilot peak search
  std::size_t freq_est_window = 0;  // samples; 0 = whole block
  std::size_t phase_smooth_window = 0;  // symbols; 0 = whole block
  FilterKind filter_kind = FilterKind::brickwall;
  double min_pilot_snr_db = 10.0;
  double sync_threshold = 1.5;  // correlation peak / strongest sidelobe
  double phase_power_floor = 0.0;
  std::size_t edge_guard_symbols = 128;  // dropped at each block end, where the pilot filter rings
  bool use_pilot = true;  // false: in-line LO, no derotation

  void validate(double sample_rate) const {
    if (!(lpf_cutoff > 0) || lpf_cutoff >= sample_rate / 2)
      throw config_error("dsp.lpf_cutoff must lie in (0, sample_rate/2)");
    if (!(bpf_fwhm > 0)) throw config_error("dsp.bpf_fwhm must be positive");
    if (!(pilot_search_span > 0)) throw config_error("dsp.pilot_search_span must be positive");
    if (!(sync_threshold >= 1)) throw config_error("dsp.sync_threshold must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Filters

/// Frequency-domain brickwall passing [f_lo, f_hi]. Circular over the block
/// unless `zero_pad` is set, which doubles the transform length so the block
/// ends do not wrap into each other.
inline std::vector<cplx> brickwall(std::span<const cplx> x, double fs, double f_lo, double f_hi,
                                   bool zero_pad = false) {
  const std::size_t n = x.size();
  const std::size_t m = zero_pad ? 2 * n : n;
  std::vector<cplx> z(m, cplx{});
  std::copy(x.begin(), x.end(), z.begin());
  fft::forward(z);
  for (std::size_t k = 0; k < m; ++k) {
    const double f = fft::bin_frequency(k, m, fs);
    if (f < f_lo || f > f_hi) z[k] = 0.0;
  }
  fft::inverse(z);
  z.resize(n);
  return z;
}

/// Blackman-windowed sinc band-pass, linear convolution, zero group delay.
inline std::vector<cplx> windowed_fir(std::span<const cplx> x, double fs, double f_lo, double f_hi) {
  const double half_bw = 0.5 * (f_hi - f_lo);
  const double center = 0.5 * (f_hi + f_lo);
  auto half_len = static_cast<std::size_t>(std::ceil(2.0 * fs / std::max(half_bw, 1.0)));
  half_len = std::min(half_len, x.size());
  const std::size_t taps = 2 * half_len + 1;
  std::vector<cplx> h(taps);
  const double wc = two_pi * half_bw / fs;
  for (std::size_t i = 0; i < taps; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(half_len);
    const double sinc = (k == 0.0) ? wc / pi : std::sin(wc * k) / (pi * k);
    const double a = two_pi * static_cast<double>(i) / static_cast<double>(taps - 1);
    const double win = 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2 * a);
    h[i] = sinc * win * std::polar(1.0, two_pi * center * k / fs);
  }
  std::size_t m = 1;
  while (m < x.size() + taps - 1) m <<= 1;
  std::vector<cplx> xa(m, cplx{}), ha(m, cplx{});
  std::copy(x.begin(), x.end(), xa.begin());
  std::copy(h.begin(), h.end(), ha.begin());
  fft::forward(xa);
  fft::forward(ha);
  for (std::size_t k = 0; k < m; ++k) xa[k] *= ha[k];
  fft::inverse(xa);
  return {xa.begin() + static_cast<long long>(half_len),
          xa.begin() + static_cast<long long>(half_len + x.size())};
}

inline std::vector<cplx> to_complex(std::span<const double> i, std::span<const double> q) {
  if (i.size() != q.size()) throw config_error("I and Q streams differ in length");
  std::vector<cplx> z(i.size());
  for (std::size_t n = 0; n < z.size(); ++n) z[n] = {i[n], q[n]};
  return z;
}

struct FilteredPilot {
  IQTrace trace;
  double center_hz = 0.0;
  double snr_db = 0.0;  // tone power over noise power inside the pass band
};

inline double pilot_center(const DspConfig& cfg, double pilot_freq) {
  return cfg.bpf_center > 0 ? cfg.bpf_center : pilot_freq;
}

/// Band-pass the pilot around its coarse spectral peak. The window is centered
/// on the power centroid near the DFT argmax, so offsets larger than the FWHM
/// stay inside the passband and a broadened line is centered on its mass.
inline FilteredPilot bandpass_pilot(std::span<const double> pilot_I, std::span<const double> pilot_Q,
                                    double fs, const DspConfig& cfg, double pilot_freq) {
  auto z = to_complex(pilot_I, pilot_Q);
  const std::size_t n = z.size();
  if (n < 2) throw config_error("bandpass_pilot: trace too short");
  const double expected = pilot_center(cfg, pilot_freq);
  if (expected + cfg.bpf_fwhm / 2 >= fs / 2 || expected - cfg.bpf_fwhm / 2 <= -fs / 2)
    throw config_error("bandpass_pilot: pass band exceeds Nyquist");

  std::vector<cplx> spec(z.begin(), z.end());
  fft::forward(spec);
  std::vector<double> pw(n);
  for (std::size_t k = 0; k < n; ++k) pw[k] = std::norm(spec[k]);

  std::size_t peak = n;
  std::vector<double> outside;
  outside.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = fft::bin_frequency(k, n, fs);
    if (std::abs(f - expected) <= cfg.pilot_search_span) {
      if (peak == n || pw[k] > pw[peak]) peak = k;
    } else {
      outside.push_back(pw[k]);
    }
  }
  if (peak == n) throw pilot_lost_error("pilot lost: no spectral bins in search window");
  const double f_peak = fft::bin_frequency(peak, n, fs);

  // centroid on a Hann-windowed spectrum, whose leakage is too weak to pull it
  std::vector<cplx> hann(z.begin(), z.end());
  for (std::size_t k = 0; k < n; ++k)
    hann[k] *= 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(k) / static_cast<double>(n));
  fft::forward(hann);
  double wsum = 0, fsum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = fft::bin_frequency(k, n, fs);
    if (std::abs(f - f_peak) <= cfg.bpf_fwhm / 2) {
      wsum += std::norm(hann[k]);
      fsum += std::norm(hann[k]) * f;
    }
  }
  const double center = wsum > 0 ? fsum / wsum : f_peak;
  const double lo = center - cfg.bpf_fwhm / 2;
  const double hi = center + cfg.bpf_fwhm / 2;
  if (hi >= fs / 2 || lo <= -fs / 2) throw config_error("bandpass_pilot: pass band exceeds Nyquist");

  double floor = 0.0;
  if (!outside.empty()) {
    auto mid = outside.begin() + static_cast<long long>(outside.size() / 2);
    std::nth_element(outside.begin(), mid, outside.end());
    floor = *mid;
  }
  double p_band = 0;
  std::size_t n_band = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = fft::bin_frequency(k, n, fs);
    if (f >= lo && f <= hi) {
      p_band += pw[k];
      ++n_band;
    }
  }
  // The median of an exponential periodogram sits at ln 2 of its mean.
  const double floor_mean = floor / std::log(2.0);
  const double signal = p_band - floor_mean * static_cast<double>(n_band);
  const double noise_total = floor_mean * static_cast<double>(n_band);

  FilteredPilot out;
  out.center_hz = center;
  out.snr_db = (noise_total > 0) ? (signal > 0 ? 10 * std::log10(signal / noise_total) : -infinity)
                                 : infinity;
  out.trace.sample_rate = fs;
  out.trace.samples = cfg.filter_kind == FilterKind::brickwall ? brickwall(z, fs, lo, hi, true)
                                                               : windowed_fir(z, fs, lo, hi);
  return out;
}

inline IQTrace lowpass_quantum(std::span<const double> quantum_I, std::span<const double> quantum_Q,
                               double fs, const DspConfig& cfg) {
  if (cfg.lpf_cutoff >= fs / 2) throw config_error("lowpass_quantum: cutoff exceeds Nyquist");
  const auto z = to_complex(quantum_I, quantum_Q);
  IQTrace out;
  out.sample_rate = fs;
  out.samples = cfg.filter_kind == FilterKind::brickwall
                    ? brickwall(z, fs, -cfg.lpf_cutoff, cfg.lpf_cutoff, false)
                    : windowed_fir(z, fs, -cfg.lpf_cutoff, cfg.lpf_cutoff);
  return out;
}

// ---------------------------------------------------------------------------
// Frequency and phase recovery

/// Mean phase increment of the filtered pilot, minus the known pilot tone.
inline double estimate_frequency_offset(const FilteredPilot& pilot, double pilot_freq,
                                        const DspConfig& cfg) {
  if (!(pilot.snr_db >= cfg.min_pilot_snr_db))
    throw pilot_lost_error("pilot lost: SNR " + std::to_string(pilot.snr_db) + " dB below floor " +
                           std::to_string(cfg.min_pilot_snr_db) + " dB");
  const auto& x = pilot.trace.samples;
  if (x.size() < 2) throw config_error("estimate_frequency_offset: trace too short");
  // whole block: skip the band-pass transients at both ends
  const auto guard = static_cast<std::size_t>(4.0 * pilot.trace.sample_rate / cfg.bpf_fwhm);
  const std::size_t whole = x.size() > 4 * guard ? x.size() - 2 * guard : x.size();
  std::size_t w = cfg.freq_est_window ? std::min(cfg.freq_est_window, x.size()) : whole;
  const std::size_t start = (x.size() - w) / 2;
  // phase of the summed increment phasors: amplitude weighted, so filter
  // ringing with a real envelope does not bias it
  cplx acc{};
  for (std::size_t n = start; n + 1 < start + w; ++n) acc += x[n + 1] * std::conj(x[n]);
  const double mean_inc = std::arg(acc);
  return pilot.trace.sample_rate / two_pi * mean_inc - pilot_freq;
}

struct PhaseTrack {
  std::vector<double> theta;  // per sample, unwrapped, radians
  double freq_offset = 0.0;   // Hz
  std::vector<double> residual_corrections;  // per symbol, from fourth-power alignment
  double sample_rate = 0.0;
};

/// theta[n] = 2 pi f_hat t + unwrap(arg(pilot * exp(-i 2 pi (f_P + f_hat) t))).
inline PhaseTrack build_phase_track(const IQTrace& pilot, double freq_offset, double pilot_freq) {
  PhaseTrack tr;
  tr.freq_offset = freq_offset;
  tr.sample_rate = pilot.sample_rate;
  const std::size_t n = pilot.size();
  tr.theta.resize(n);
  const double w_total = two_pi * (pilot_freq + freq_offset) / pilot.sample_rate;
  const double w_off = two_pi * freq_offset / pilot.sample_rate;
  double prev = 0.0, unwrapped = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k);
    const cplx mixed = pilot.samples[k] * std::polar(1.0, -std::fmod(w_total * t, two_pi));
    const double ph = std::arg(mixed);
    if (k == 0) {
      unwrapped = ph;
    } else {
      unwrapped += std::remainder(ph - prev, two_pi);
    }
    prev = ph;
    tr.theta[k] = w_off * t + unwrapped;
  }
  return tr;
}

inline IQTrace derotate(IQTrace trace, const PhaseTrack& track) {
  if (trace.size() != track.theta.size()) throw config_error("derotate: length mismatch");
  for (std::size_t n = 0; n < trace.size(); ++n) trace.samples[n] *= std::polar(1.0, -track.theta[n]);
  return trace;
}

struct FourthPowerResult {
  std::vector<cplx> aligned;
  std::vector<double> residual_phase;  // per symbol, radians
};

/// Blind QPSK residual-phase removal. Per window, raising to the fourth power
/// maps the constellation (points at odd multiples of pi/4, whose fourth power
/// is -1) to one angle: phi = arg(-mean(s^4)) / 4. The pi/2 ambiguity is
/// resolved by continuity, starting from `initial_phase`.
inline FourthPowerResult fourth_power_align(std::span<const cplx> symbols, std::size_t window,
                                            double initial_phase = 0.0, double power_floor = 0.0) {
  FourthPowerResult out;
  out.aligned.resize(symbols.size());
  out.residual_phase.resize(symbols.size());
  const std::size_t w = window ? window : std::max<std::size_t>(symbols.size(), 1);
  double last = initial_phase;
  for (std::size_t start = 0; start < symbols.size(); start += w) {
    const std::size_t stop = std::min(start + w, symbols.size());
    cplx m4{};
    double pw = 0.0;
    for (std::size_t k = start; k < stop; ++k) {
      const cplx s2 = symbols[k] * symbols[k];
      m4 += s2 * s2;
      pw += std::norm(symbols[k]);
    }
    const double count = static_cast<double>(stop - start);
    pw /= count;
    double phi = last;
    if (pw > power_floor && std::abs(m4) > 0) {
      const double raw = std::arg(-m4 / count) / 4.0;
      phi = raw + (pi / 2) * std::round((last - raw) / (pi / 2));
    }
    last = phi;
    const cplx rot = std::polar(1.0, -phi);
    for (std::size_t k = start; k < stop; ++k) {
      out.aligned[k] = symbols[k] * rot;
      out.residual_phase[k] = phi;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clock synchronization

struct SyncResult {
  long long delay = 0;       // samples, modulo the PRBS period
  double peak_ratio = 0.0;   // main peak over strongest sidelobe
  double peak_phase = 0.0;   // phase of the complex correlation peak
  SymbolFrame frame;
  std::vector<std::size_t> sample_index;  // trace position of each symbol center
};

/// Circular cross-correlation of the trace, folded onto one PRBS period, with
/// the carved reference period, evaluated through the DFT.
inline SyncResult clock_sync(const IQTrace& trace, const QpskMapping& period, const TxConfig& tx,
                             double threshold, std::size_t edge_guard = 0) {
  const int sps = tx.samples_per_symbol;
  const std::size_t p_len = period.symbols.size() * static_cast<std::size_t>(sps);
  if (trace.size() < p_len) throw config_error("clock_sync: trace shorter than one PRBS period");

  TxConfig unit = tx;
  unit.v_mod = 0.5;  // unit-amplitude symbols
  std::vector<cplx> ref = carve_pulses_periodic(period.symbols, unit, 1).samples;

  cplx mean{};
  for (const auto& s : trace.samples) mean += s;
  mean /= static_cast<double>(trace.size());
  std::vector<cplx> folded(p_len, cplx{});
  for (std::size_t n = 0; n < trace.size(); ++n) folded[n % p_len] += trace.samples[n] - mean;

  fft::forward(folded);
  fft::forward(ref);
  for (std::size_t k = 0; k < p_len; ++k) folded[k] *= std::conj(ref[k]);
  fft::inverse(folded);

  std::size_t best = 0;
  for (std::size_t k = 1; k < p_len; ++k)
    if (std::abs(folded[k]) > std::abs(folded[best])) best = k;
  // sidelobes are searched at least one symbol away, outside the pulse mainlobe
  double second = 0.0;
  const auto guard = static_cast<long long>(sps - 1);
  for (std::size_t k = 0; k < p_len; ++k) {
    long long d = static_cast<long long>(k) - static_cast<long long>(best);
    d = std::abs(std::remainder(static_cast<double>(d), static_cast<double>(p_len))) > guard ? 1 : 0;
    if (d) second = std::max(second, std::abs(folded[k]));
  }

  SyncResult res;
  res.delay = static_cast<long long>(best);
  res.peak_ratio = second > 0 ? std::abs(folded[best]) / second : infinity;
  res.peak_phase = std::arg(folded[best]);
  if (res.peak_ratio < threshold)
    throw sync_error("sync failed: correlation peak ratio " + std::to_string(res.peak_ratio) +
                     " below threshold " + std::to_string(threshold));

  const long long center = static_cast<long long>(best) + symbol_center_offset(tx);
  const long long first = center % sps;
  std::vector<std::size_t> idx;
  for (long long n = first; n < static_cast<long long>(trace.size()); n += sps)
    idx.push_back(static_cast<std::size_t>(n));
  if (idx.size() > 2 * edge_guard) {
    idx.erase(idx.end() - static_cast<long long>(edge_guard), idx.end());
    idx.erase(idx.begin(), idx.begin() + static_cast<long long>(edge_guard));
  }
  const auto nper = static_cast<long long>(period.symbols.size());
  res.frame.symbol_rate = tx.symbol_rate;
  for (std::size_t n : idx) {
    long long m = (static_cast<long long>(n) - center) / sps;
    if ((static_cast<long long>(n) - center) % sps != 0 || static_cast<long long>(n) < center)
      m = (static_cast<long long>(n) - center - (sps - 1)) / sps;
    long long pos = m % nper;
    if (pos < 0) pos += nper;
    res.frame.symbols.push_back(trace.samples[n]);
    res.frame.tx_symbols.push_back(period.indices[static_cast<std::size_t>(pos)]);
    res.frame.prbs_position.push_back(static_cast<std::uint32_t>(pos));
  }
  res.sample_index = std::move(idx);
  return res;
}

/// Data-aided final check: rotate by the multiple of pi/2 that best matches the
/// known transmitted symbols. Returns the applied rotation.
inline double resolve_quadrant(SymbolFrame& frame) {
  cplx acc{};
  for (std::size_t k = 0; k < frame.size(); ++k)
    acc += frame.symbols[k] * std::conj(qpsk_point(frame.tx_symbols[k]));
  const double q = std::round(std::arg(acc) / (pi / 2));
  const double rot = q * (pi / 2);
  if (rot != 0.0) {
    const cplx r = std::polar(1.0, -rot);
    for (auto& s : frame.symbols) s *= r;
  }
  return rot;
}

inline double symbol_error_ratio(const SymbolFrame& frame) {
  if (frame.size() == 0) return 0.0;
  std::size_t errors = 0;
  for (std::size_t k = 0; k < frame.size(); ++k)
    errors += qpsk_decide(frame.symbols[k]) != frame.tx_symbols[k];
  return static_cast<double>(errors) / static_cast<double>(frame.size());
}

// ---------------------------------------------------------------------------
// Whole chain

struct DspResult {
  SymbolFrame frame;
  PhaseTrack track;
  double pilot_snr_db = 0.0;
  double pilot_center_hz = 0.0;
  long long delay = 0;
  double peak_ratio = 0.0;
  double quadrant_rotation = 0.0;
  std::vector<std::size_t> sample_index;
  std::vector<double> symbol_phase_correction;  // total phase removed at each symbol
};

/// band-pass -> frequency estimate -> phase track -> derotation -> low-pass ->
/// clock sync -> fourth-power alignment -> quadrant resolution.
inline DspResult process_record(const MeasurementRecord& rec, const TxConfig& tx, const DspConfig& cfg) {
  rec.validate();
  const double fs = rec.sample_rate;
  cfg.validate(fs);
  const double sps_adc = fs / tx.symbol_rate;
  if (std::abs(sps_adc - std::round(sps_adc)) > 1e-9 || sps_adc < 4)
    throw config_error("ADC rate must be an integer multiple (>= 4) of the symbol rate");
  TxConfig rx_tx = tx;
  rx_tx.samples_per_symbol = static_cast<int>(std::lround(sps_adc));

  DspResult out;
  if (cfg.use_pilot) {
    const auto fp = bandpass_pilot(rec.pilot_I, rec.pilot_Q, fs, cfg, tx.pilot_freq);
    out.pilot_snr_db = fp.snr_db;
    out.pilot_center_hz = fp.center_hz;
    const double f_hat = estimate_frequency_offset(fp, tx.pilot_freq, cfg);
    out.track = build_phase_track(fp.trace, f_hat, tx.pilot_freq);
  } else {
    out.track.theta.assign(rec.size(), 0.0);
    out.track.sample_rate = fs;
  }

  // derotate before the low-pass: the offset shifts the signal band, and the
  // low-pass would clip its edge
  IQTrace raw;
  raw.sample_rate = fs;
  raw.samples = to_complex(rec.quantum_I, rec.quantum_Q);
  raw = derotate(std::move(raw), out.track);
  std::vector<double> ri(raw.size()), rq(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    ri[k] = raw.samples[k].real();
    rq[k] = raw.samples[k].imag();
  }
  IQTrace q = lowpass_quantum(ri, rq, fs, cfg);
  const auto period = prbs_symbol_period(tx.prbs_seed);
  auto sync = clock_sync(q, period, rx_tx, cfg.sync_threshold, cfg.edge_guard_symbols);
  out.delay = sync.delay;
  out.peak_ratio = sync.peak_ratio;

  auto fp4 = fourth_power_align(sync.frame.symbols, cfg.phase_smooth_window, 0.0, cfg.phase_power_floor);
  sync.frame.symbols = std::move(fp4.aligned);
  out.quadrant_rotation = resolve_quadrant(sync.frame);

  out.symbol_phase_correction.resize(sync.frame.size());
  for (std::size_t k = 0; k < sync.frame.size(); ++k)
    out.symbol_phase_correction[k] =
        out.track.theta[sync.sample_index[k]] + fp4.residual_phase[k] + out.quadrant_rotation;
  out.track.residual_corrections = std::move(fp4.residual_phase);
  out.frame = std::move(sync.frame);
  out.sample_index = std::move(sync.sample_index);
  return out;
}

}  // namespace intradyne
