#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "intradyne/estimation.hpp"
#include "intradyne/random.hpp"

using namespace intradyne;

namespace {

/// Frame in SNU: y = sqrt(T V) s + n, Var[n] = 1 + xi/2 per quadrature.
SymbolFrame synth_frame(std::size_t n, double T, double V, double xi, Rng& rng, double scale = 1.0,
                        double rot = 0.0) {
  SymbolFrame f;
  f.symbol_rate = 250e6;
  const auto period = prbs_symbol_period(0x7f);
  const double a = std::sqrt(T * V);
  const double nv = 1.0 + xi / 2.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto idx = period.indices[k % period.indices.size()];
    const cplx y = a * qpsk_point(idx) * std::polar(1.0, rot) + complex_gaussian(rng, nv);
    f.symbols.push_back(scale * y);
    f.tx_symbols.push_back(idx);
    f.prbs_position.push_back(static_cast<std::uint32_t>(k % 127));
  }
  return f;
}

CalibrationSet flat_cal(double n0 = 1.0, double elec = 0.0105) {
  return {std::vector<double>(8, n0 + elec), std::vector<double>(4, elec), CalibrationPolicy::averaged};
}

}  // namespace

TEST(SnuNormalize, PathologicalButDefined) {
  CalibrationSet c{{2.0}, {1.0}, CalibrationPolicy::averaged};
  const auto nm = normalization(c, CalibrationPolicy::averaged);
  EXPECT_DOUBLE_EQ(nm.n0, 1.0);
  EXPECT_DOUBLE_EQ(nm.xi_det_prime(), 1.0);
  std::vector<double> i{1.0, -2.0}, q{0.5, 0.0};
  const auto [ni, nq] = snu_normalize(i, q, c);
  EXPECT_EQ(ni, i);
  EXPECT_EQ(nq, q);
}

TEST(SnuNormalize, TwentyDbClearance) {
  CalibrationSet c{{101.0 * 3.7}, {1.0 * 3.7}, CalibrationPolicy::averaged};
  const auto nm = normalization(c, CalibrationPolicy::averaged);
  EXPECT_NEAR(nm.xi_det_prime(), 0.01, 1e-12);
  EXPECT_NEAR(2 * nm.xi_det_prime(), 0.02, 1e-12);
}

TEST(SnuNormalize, VacuumBlockHasUnitVariance) {
  Rng rng(1);
  const double raw_n0 = 7.3, elec = 0.07;
  std::normal_distribution<double> g(0.0, std::sqrt(raw_n0 + elec));
  const std::size_t n = 1 << 16;
  std::vector<double> i(n), q(n);
  for (std::size_t k = 0; k < n; ++k) {
    i[k] = g(rng);
    q[k] = g(rng);
  }
  CalibrationSet c{{raw_n0 + elec}, {elec}, CalibrationPolicy::averaged};
  const auto [ni, nq] = snu_normalize(i, q, c);
  EXPECT_NEAR(quadrature_variance(ni, nq), 1.0 + elec / raw_n0, 4 / std::sqrt(static_cast<double>(n)));
}

TEST(SnuNormalize, InvalidCalibration) {
  std::vector<double> x{1.0};
  EXPECT_THROW(snu_normalize(x, x, CalibrationSet{{1.0}, {1.0}, CalibrationPolicy::averaged}), calibration_error);
  EXPECT_THROW(snu_normalize(x, x, CalibrationSet{{1.0}, {2.0}, CalibrationPolicy::worst_case}), calibration_error);
  EXPECT_THROW(snu_normalize(x, x, CalibrationSet{{}, {0.1}, CalibrationPolicy::averaged}), calibration_error);
  EXPECT_THROW(snu_normalize(SymbolFrame{}, 0.0), calibration_error);
}

TEST(ConditionalVariance, NoiselessIsZero) {
  Rng rng(2);
  SymbolFrame f;
  const auto p = prbs_symbol_period(0x7f);
  for (std::size_t k = 0; k < 254; ++k) {
    f.tx_symbols.push_back(p.indices[k % 127]);
    f.symbols.push_back(1.3 * qpsk_point(p.indices[k % 127]));
  }
  EXPECT_NEAR(conditional_variance(f), 0.0, 1e-24);
}

TEST(ConditionalVariance, PureShotNoiseIsOne) {
  Rng rng(3);
  const auto f = synth_frame(1 << 16, 0.35, 3.7, 0.0, rng);
  EXPECT_NEAR(conditional_variance(f), 1.0, 4 * std::sqrt(1.0 / (1 << 16)));
}

TEST(ConditionalVariance, ThirteenKilometreTotalNoise) {
  Rng rng(4);
  const std::size_t n = 1 << 20;
  const auto f = synth_frame(n, 0.35, 3.7, 0.022, rng);
  const double v = conditional_variance(f);
  EXPECT_NEAR(v, 1.011, 4 * 1.011 * std::sqrt(1.0 / n));
  EXPECT_NEAR(excess_noise(v), 0.022, 0.005);
}

TEST(ConditionalVariance, InvariantToCommonRotation) {
  Rng a(5);
  const auto f = synth_frame(4096, 0.35, 3.7, 0.02, a);
  SymbolFrame r = f;
  for (auto& s : r.symbols) s *= std::polar(1.0, 0.7);
  EXPECT_NEAR(conditional_variance(r), conditional_variance(f), 1e-12);
}

TEST(ConditionalVariance, EmptyClassRejected) {
  SymbolFrame f;
  for (int k = 0; k < 20; ++k) {
    f.tx_symbols.push_back(static_cast<std::uint8_t>(k % 3));
    f.symbols.push_back(qpsk_point(static_cast<std::uint8_t>(k % 3)));
  }
  EXPECT_THROW(conditional_variance(f), std::invalid_argument);
  EXPECT_THROW(conditional_variance(SymbolFrame{}), std::invalid_argument);
}

TEST(ExcessNoise, TableValues) {
  EXPECT_DOUBLE_EQ(excess_noise(1.0), 0.0);
  EXPECT_NEAR(excess_noise(1.011), 0.022, 1e-12);
  EXPECT_NEAR(excess_noise(1.0335), 0.067, 1e-12);
  EXPECT_NEAR(excess_noise(0.99), -0.02, 1e-12);  // reported, not clamped
}

TEST(Snr, TableValues) {
  EXPECT_NEAR(snr(0.10, 12.5, 0.026), 0.617, 0.001);
  EXPECT_NEAR(snr(0.35, 3.7, 0.022), 0.640, 0.001);
  EXPECT_DOUBLE_EQ(snr(1.0, 2.0, 0.0), 1.0);
  EXPECT_THROW(snr(0.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(snr(0.5, -1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(snr(0.5, 1.0, -2.0), std::invalid_argument);
}

TEST(MeanPhotonNumber, TableValues) {
  EXPECT_NEAR(mean_photon_number(0.53, 4.1), 1.09, 0.005);
  EXPECT_NEAR(mean_photon_number(0.10, 12.5), 0.625, 1e-12);
  EXPECT_EQ(mean_photon_number(0.0, 5.0), 0.0);
}

TEST(BuildReport, IdenticalCalibrationsGiveEqualPolicies) {
  Rng rng(6);
  const auto f = synth_frame(8192, 0.35, 3.7, 0.022, rng);
  const auto r = build_report(std::span(&f, 1), flat_cal(), true, {0.35, 3.7});
  EXPECT_NEAR(r.averaged.xi_tot, r.worst_case.xi_tot, 1e-12);
  EXPECT_NEAR(r.averaged.n0, r.worst_case.n0, 1e-12);
  EXPECT_NEAR(r.averaged.T, r.worst_case.T, 1e-12);
}

TEST(BuildReport, TrustedIdentityAndFlag) {
  Rng rng(7);
  const auto f = synth_frame(8192, 0.35, 3.7, 0.022, rng);
  for (bool trusted : {true, false}) {
    const auto r = build_report(std::span(&f, 1), flat_cal(), trusted, {0.35, 3.7});
    for (auto p : {CalibrationPolicy::averaged, CalibrationPolicy::worst_case}) {
      const auto& e = r.get(p);
      EXPECT_EQ(e.xi_minus_det, e.xi_tot - e.xi_det);
      EXPECT_EQ(e.xi_eve, trusted ? e.xi_minus_det : e.xi_tot);
    }
  }
}

TEST(BuildReport, PolicyOrderingOverRandomSets) {
  Rng rng(8);
  const auto f = synth_frame(8192, 0.35, 3.7, 0.022, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    CalibrationSet c;
    for (int k = 0; k < 8; ++k) c.shot_variances.push_back(1.0105 * (1 + 0.012 * g(rng)));
    for (int k = 0; k < 4; ++k) c.elec_variances.push_back(0.0105 * (1 + 0.057 * g(rng)));
    const auto r = build_report(std::span(&f, 1), c, true, {0.35, 3.7});
    EXPECT_GE(r.worst_case.xi_tot, r.averaged.xi_tot);
    // brute force over every pairing
    double best = -infinity;
    for (double s : c.shot_variances)
      for (double e : c.elec_variances) best = std::max(best, 2 * (conditional_variance(f) / (s - e) - 1));
    EXPECT_NEAR(r.worst_case.xi_tot, best, 1e-12);
  }
}

TEST(BuildReport, RecoversThirteenKilometreRow) {
  Rng rng(9);
  std::vector<SymbolFrame> frames;
  for (int b = 0; b < 64; ++b) frames.push_back(synth_frame(4096, 0.35, 3.7, 0.022, rng, 2.0, 0.3));
  // raw units: scale 2 in amplitude -> N0 = 4, 20 dB clearance plus a little
  CalibrationSet c{std::vector<double>(8, 4.0 * 1.0105), std::vector<double>(4, 4.0 * 0.0105),
                   CalibrationPolicy::averaged};
  const auto r = build_report(frames, c, true, {0.35, 3.7});
  EXPECT_NEAR(r.averaged.xi_tot, 0.022, 0.005);
  EXPECT_NEAR(r.averaged.xi_minus_det, 0.001, 0.005);
  EXPECT_NEAR(r.averaged.xi_det, 0.021, 1e-12);
  EXPECT_NEAR(r.averaged.T, 0.35, 0.01);
  EXPECT_NEAR(r.averaged.V_mod_est, 3.7, 0.1);
  EXPECT_NEAR(r.averaged.snr, 0.640, 0.02);
  EXPECT_EQ(r.blocks, 64u);
  EXPECT_EQ(r.symbols, 64u * 4096u);
}

TEST(BuildReport, DecompositionInvariant) {
  Rng rng(10);
  std::vector<SymbolFrame> frames;
  for (int b = 0; b < 32; ++b) frames.push_back(synth_frame(4096, 0.5, 4.0, 0.03, rng));
  const auto r = build_report(frames, flat_cal(1.0, 1e-9), false, {0.5, 4.0});
  const double n = 32.0 * 4096;
  EXPECT_NEAR(r.averaged.v_b - r.averaged.v_cond, 0.5 / 2 * 4.0, 4 * 2.0 * std::sqrt(2.0 / n) * 2);
  EXPECT_NEAR(r.averaged.snr_empirical, (0.5 / 2 * 4.0) / r.averaged.v_cond, 0.02);
}

TEST(BuildReport, PoolingIsOrderIndependent) {
  Rng rng(11);
  std::vector<SymbolFrame> frames;
  for (int b = 0; b < 5; ++b) frames.push_back(synth_frame(1000 + 37 * b, 0.35, 3.7, 0.02, rng));
  FrameStatistics fwd, rev;
  for (const auto& f : frames) fwd += frame_statistics(f);
  for (auto it = frames.rbegin(); it != frames.rend(); ++it) rev += frame_statistics(*it);
  EXPECT_NEAR(fwd.v_cond(), rev.v_cond(), 1e-12);
  EXPECT_NEAR(std::abs(fwd.gain() - rev.gain()), 0.0, 1e-12);
  EXPECT_EQ(fwd.symbols, rev.symbols);
}

TEST(BuildReport, EstimatorConsistencyMonteCarlo) {
  // Over M blocks the mean estimate sits within 3 SE of truth and the
  // standard error shrinks like 1/sqrt(M N).
  Rng rng(12);
  const int m = 200;
  const std::size_t n = 4096;
  double sum = 0, sum2 = 0;
  for (int b = 0; b < m; ++b) {
    const double xi = excess_noise(conditional_variance(synth_frame(n, 0.35, 3.7, 0.022, rng)));
    sum += xi;
    sum2 += xi * xi;
  }
  const double mean = sum / m;
  const double sd = std::sqrt(sum2 / m - mean * mean);
  const double se = sd / std::sqrt(static_cast<double>(m));
  EXPECT_NEAR(mean, 0.022, 3 * se);
  // sd of xi = 2 * v_cond * sqrt(1/(N-4)) for pooled I and Q
  EXPECT_NEAR(sd / (2 * 1.011 * std::sqrt(1.0 / (n - 4))), 1.0, 0.15);
}

TEST(BuildReport, RejectsEmptyInput) {
  EXPECT_THROW(build_report(std::span<const SymbolFrame>{}, flat_cal(), true, {}), std::invalid_argument);
  Rng rng(13);
  const auto f = synth_frame(512, 0.35, 3.7, 0.0, rng);
  EXPECT_THROW(build_report(std::span(&f, 1), CalibrationSet{{1.0}, {2.0}, {}}, true, {}), calibration_error);
}
