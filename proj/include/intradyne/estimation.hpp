// Shot-noise calibration, conditional variance, excess noise and SNR.
//
// Conventions: SNU with N0 = 1, receiver referred, electronic noise counted in
// xi_tot, per-arm quantities doubled for the balanced beamsplitter.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intradyne/types.hpp"
#include "intradyne/wavegen.hpp"

namespace intradyne {

enum class CalibrationPolicy { averaged, worst_case };

inline std::string_view to_string(CalibrationPolicy p) {
  return p == CalibrationPolicy::averaged ? "averaged" : "worst_case";
}

struct CalibrationSet {
  std::vector<double> shot_variances;  // raw units, LO on, signal off
  std::vector<double> elec_variances;  // raw units, LO off
  CalibrationPolicy policy = CalibrationPolicy::averaged;

  void validate() const {
    if (shot_variances.empty() || elec_variances.empty())
      throw calibration_error("invalid calibration: empty measurement list");
    for (double v : shot_variances)
      if (!(v > 0)) throw calibration_error("invalid calibration: shot variance must be > 0");
    for (double v : elec_variances)
      if (!(v > 0)) throw calibration_error("invalid calibration: electronic variance must be > 0");
  }
};

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// The shot-noise unit and the electronic-noise variance it is paired with.
struct Normalization {
  double n0 = 0.0;
  double elec = 0.0;
  double xi_det_prime() const { return elec / n0; }
};

/// Averaged: means of both lists. Worst case without data: the smallest N0,
/// i.e. the pairing that maximizes xi for any positive signal variance.
inline Normalization normalization(const CalibrationSet& cal, CalibrationPolicy policy) {
  cal.validate();
  Normalization out;
  if (policy == CalibrationPolicy::averaged) {
    out.elec = mean_of(cal.elec_variances);
    out.n0 = mean_of(cal.shot_variances) - out.elec;
  } else {
    out.elec = *std::max_element(cal.elec_variances.begin(), cal.elec_variances.end());
    out.n0 = *std::min_element(cal.shot_variances.begin(), cal.shot_variances.end()) - out.elec;
  }
  if (!(out.n0 > 0)) throw calibration_error("invalid calibration: N0 <= 0");
  return out;
}

inline std::pair<std::vector<double>, std::vector<double>> snu_normalize(std::span<const double> raw_I,
                                                                         std::span<const double> raw_Q,
                                                                         const CalibrationSet& cal) {
  const auto nm = normalization(cal, cal.policy);
  const double s = 1.0 / std::sqrt(nm.n0);
  std::vector<double> i(raw_I.begin(), raw_I.end()), q(raw_Q.begin(), raw_Q.end());
  for (auto& x : i) x *= s;
  for (auto& x : q) x *= s;
  return {std::move(i), std::move(q)};
}

inline SymbolFrame snu_normalize(SymbolFrame frame, double n0) {
  if (!(n0 > 0)) throw calibration_error("invalid calibration: N0 <= 0");
  const double s = 1.0 / std::sqrt(n0);
  for (auto& x : frame.symbols) x *= s;
  return frame;
}

/// Sample variance of a real sequence, averaged over I and Q for a trace.
inline double quadrature_variance(std::span<const double> i, std::span<const double> q) {
  auto var = [](std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("variance needs at least two samples");
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
  };
  return 0.5 * (var(i) + var(q));
}

/// Additive per-frame sums; pooling frames is adding these field by field.
struct FrameStatistics {
  double ss_cond = 0.0;  // within-class sum of squares, I and Q together
  double dof_cond = 0.0;
  double ss_total = 0.0;
  double dof_total = 0.0;
  cplx cross{};          // sum y * conj(s) over unit-energy reference points
  double ref_energy = 0.0;
  std::size_t symbols = 0;
  std::size_t frames = 0;

  FrameStatistics& operator+=(const FrameStatistics& o) {
    ss_cond += o.ss_cond;
    dof_cond += o.dof_cond;
    ss_total += o.ss_total;
    dof_total += o.dof_total;
    cross += o.cross;
    ref_energy += o.ref_energy;
    symbols += o.symbols;
    frames += o.frames;
    return *this;
  }

  double v_cond() const { return ss_cond / dof_cond; }
  double v_total() const { return ss_total / dof_total; }
  /// Least-squares complex gain of y against the unit reference constellation.
  cplx gain() const { return cross / ref_energy; }
};

/// Pooled within-class variance over the four QPSK classes, per quadrature
/// with N - 4 degrees of freedom. Invariant to common rotation and offset.
inline FrameStatistics frame_statistics(const SymbolFrame& frame) {
  if (frame.tx_symbols.size() != frame.symbols.size())
    throw std::invalid_argument("SymbolFrame: symbols and tx_symbols differ in length");
  std::array<std::size_t, 4> count{};
  std::array<cplx, 4> sum{};
  cplx total{};
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const auto c = frame.tx_symbols[k] & 3u;
    ++count[c];
    sum[c] += frame.symbols[k];
    total += frame.symbols[k];
  }
  for (auto c : count)
    if (c < 2) throw std::invalid_argument("conditional_variance: constellation class with < 2 symbols");

  FrameStatistics st;
  const double n = static_cast<double>(frame.size());
  const cplx mean_all = total / n;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const auto c = frame.tx_symbols[k] & 3u;
    const cplx y = frame.symbols[k];
    const cplx dc = y - sum[c] / static_cast<double>(count[c]);
    const cplx dt = y - mean_all;
    st.ss_cond += std::norm(dc);
    st.ss_total += std::norm(dt);
    const cplx s = qpsk_point(frame.tx_symbols[k]);
    st.cross += y * std::conj(s);
    st.ref_energy += std::norm(s);
  }
  st.dof_cond = 2.0 * (n - 4.0);
  st.dof_total = 2.0 * (n - 1.0);
  st.symbols = frame.size();
  st.frames = 1;
  return st;
}

inline double conditional_variance(const SymbolFrame& frame) { return frame_statistics(frame).v_cond(); }

inline double excess_noise(double v_cond) {
  if (v_cond < 0) throw std::invalid_argument("excess_noise: negative variance");
  return 2.0 * (v_cond - 1.0);
}

inline double snr(double T, double v_mod, double xi) {
  if (!(T > 0 && T <= 1)) throw std::invalid_argument("snr: T must lie in (0, 1]");
  if (!(v_mod > 0)) throw std::invalid_argument("snr: V_mod must be positive");
  if (!(1.0 + xi / 2.0 > 0)) throw std::invalid_argument("snr: 1 + xi/2 must be positive");
  return (T / 2.0 * v_mod) / (1.0 + xi / 2.0);
}

inline double snr_empirical(double v_b, double v_cond) { return v_b / v_cond - 1.0; }

inline double mean_photon_number(double T, double v_mod) { return T * v_mod / 2.0; }

struct PolicyEstimate {
  CalibrationPolicy policy = CalibrationPolicy::averaged;
  double n0 = 0.0;  // raw units
  double v_b = 0.0;     // V'_B, SNU per arm
  double v_cond = 0.0;  // V'_{B|A}, SNU per arm
  double T = 0.0;
  double V_mod = 0.0;      // nominal, used for SNR and n_B
  double V_mod_est = 0.0;  // back-estimated with the nominal T
  double n_B = 0.0;
  double snr = 0.0;
  double snr_empirical = 0.0;
  double xi_tot = 0.0;
  double xi_det = 0.0;
  double xi_minus_det = 0.0;
  double xi_eve = 0.0;  // xi attributed to Eve: xi_minus_det if trusted, else xi_tot
  bool negative_xi = false;
};

struct EstimationReport {
  std::string label;
  PolicyEstimate averaged;
  PolicyEstimate worst_case;
  bool trusted_receiver = true;
  std::size_t blocks = 0;
  std::size_t symbols = 0;
  double T_nominal = 0.0;
  double V_mod_nominal = 0.0;
  std::vector<std::string> warnings;

  const PolicyEstimate& get(CalibrationPolicy p) const {
    return p == CalibrationPolicy::averaged ? averaged : worst_case;
  }
};

struct NominalLink {
  double T = 1.0;      // receiver-referred transmittance the run was set up for
  double V_mod = 1.0;  // SNU per quadrature
};

namespace detail {

inline PolicyEstimate estimate_with(const FrameStatistics& st, const Normalization& nm, CalibrationPolicy p,
                                    const NominalLink& nom, bool trusted) {
  PolicyEstimate e;
  e.policy = p;
  e.n0 = nm.n0;
  e.v_b = st.v_total() / nm.n0;
  e.v_cond = st.v_cond() / nm.n0;
  const double g2 = std::norm(st.gain()) / nm.n0;  // T * V_mod in SNU
  e.V_mod = nom.V_mod;
  e.T = g2 / nom.V_mod;
  e.V_mod_est = g2 / nom.T;
  e.n_B = mean_photon_number(e.T, e.V_mod);
  e.xi_tot = excess_noise(e.v_cond);
  e.xi_det = 2.0 * nm.xi_det_prime();
  e.xi_minus_det = e.xi_tot - e.xi_det;
  e.xi_eve = trusted ? e.xi_minus_det : e.xi_tot;
  e.negative_xi = e.xi_tot < 0;
  e.snr = (e.T > 0 && e.T <= 1 && 1 + e.xi_tot / 2 > 0) ? snr(e.T, e.V_mod, e.xi_tot)
                                                        : (e.T / 2 * e.V_mod) / (1 + e.xi_tot / 2);
  e.snr_empirical = snr_empirical(e.v_b, e.v_cond);
  return e;
}

}  // namespace detail

/// Worst case: every (shot, elec) pairing is evaluated and the one giving the
/// largest xi_tot is kept.
inline EstimationReport build_report(const FrameStatistics& pooled, const CalibrationSet& cal, bool trusted,
                                     const NominalLink& nom) {
  cal.validate();
  if (pooled.frames == 0 || pooled.dof_cond <= 0) throw std::invalid_argument("build_report: no frames");
  EstimationReport r;
  r.trusted_receiver = trusted;
  r.blocks = pooled.frames;
  r.symbols = pooled.symbols;
  r.T_nominal = nom.T;
  r.V_mod_nominal = nom.V_mod;

  r.averaged = detail::estimate_with(pooled, normalization(cal, CalibrationPolicy::averaged),
                                     CalibrationPolicy::averaged, nom, trusted);

  bool found = false;
  for (double s : cal.shot_variances) {
    for (double e : cal.elec_variances) {
      if (!(s > e)) continue;
      const auto est =
          detail::estimate_with(pooled, Normalization{s - e, e}, CalibrationPolicy::worst_case, nom, trusted);
      if (!found || est.xi_tot > r.worst_case.xi_tot) r.worst_case = est;
      found = true;
    }
  }
  if (!found) throw calibration_error("invalid calibration: no shot/electronic pair with N0 > 0");
  if (r.averaged.negative_xi || r.worst_case.negative_xi)
    r.warnings.push_back("negative excess-noise estimate (finite statistics)");
  return r;
}

inline EstimationReport build_report(std::span<const SymbolFrame> frames, const CalibrationSet& cal,
                                     bool trusted, const NominalLink& nom) {
  if (frames.empty()) throw std::invalid_argument("build_report: no frames");
  FrameStatistics pooled;
  for (const auto& f : frames) pooled += frame_statistics(f);
  return build_report(pooled, cal, trusted, nom);
}

}  // namespace intradyne
