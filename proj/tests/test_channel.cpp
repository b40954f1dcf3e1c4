#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "intradyne/channel.hpp"
#include "intradyne/fft.hpp"
#include "intradyne/wavegen.hpp"

using namespace intradyne;

namespace {

DualPolFrame test_frame(std::size_t n = 2032) {
  TxConfig c;
  return synthesize_transmitter(c, n);
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(ApplyLoss, ScalesAmplitudeBySqrtT) {
  const auto f = test_frame();
  EXPECT_EQ(apply_loss(f, 1.0).quantum.samples, f.quantum.samples);
  const auto h = apply_loss(f, 0.25);
  for (std::size_t n = 0; n < f.quantum.size(); n += 31) {
    EXPECT_NEAR(std::abs(h.quantum.samples[n] - 0.5 * f.quantum.samples[n]), 0, 1e-12);
    EXPECT_NEAR(std::abs(h.pilot.samples[n] - 0.5 * f.pilot.samples[n]), 0, 1e-12);
  }
  const auto t = apply_loss(f, 0.35);
  EXPECT_NEAR(mean_power(t.quantum.samples) / mean_power(f.quantum.samples), 0.35, 1e-12);
  EXPECT_THROW(apply_loss(f, 0.0), config_error);
  EXPECT_THROW(apply_loss(f, 1.1), config_error);
}

TEST(ChannelConfig, FibreLength) {
  ChannelConfig c;
  c.fibre_length_km = 50;
  EXPECT_NEAR(c.effective_transmittance(), 0.1, 1e-12);
  c.transmittance = 0.6;
  EXPECT_EQ(c.effective_transmittance(), 0.6);
  c.combined_linewidth = -1;
  EXPECT_THROW(c.validate(), config_error);
}

TEST(PhaseNoise, ZeroLinewidthIsIdentity) {
  const auto f = test_frame();
  Rng rng(1);
  const auto g = apply_phase_noise(f, 0.0, rng);
  EXPECT_EQ(g.quantum.samples, f.quantum.samples);
  EXPECT_EQ(g.pilot.samples, f.pilot.samples);
}

TEST(PhaseNoise, IncrementVarianceMatchesLinewidth) {
  // Var[phi(n+m) - phi(n)] = 2 pi dv m / fs, over 20000 realizations.
  const double lw = 420e3, fs = 4e9;
  const std::size_t m = 400;
  double acc = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    const auto phi = wiener_phase_path(m + 1, lw, fs, rng);
    acc += phi[m] * phi[m];
  }
  const double expect = two_pi * lw * m / fs;
  EXPECT_NEAR(acc / trials / expect, 1.0, 0.04);  // 4 SE
}

TEST(PhaseNoise, SameRealizationOnBothTributaries) {
  const auto f = test_frame();
  Rng a(5), b(5);
  const auto g = apply_phase_noise(f, 400e3, a);
  const auto h = apply_phase_noise(f, 400e3, b);
  EXPECT_EQ(g.quantum.samples, h.quantum.samples);
  for (std::size_t n = 1; n < f.quantum.size(); n += 17) {
    const double dq = std::arg(g.quantum.samples[n] / f.quantum.samples[n]);
    const double dp = std::arg(g.pilot.samples[n] / f.pilot.samples[n]);
    EXPECT_NEAR(std::remainder(dq - dp, two_pi), 0, 1e-9);
  }
}

TEST(FrequencyOffset, MovesPilotPeak) {
  TxConfig c;
  c.carrier_suppression_db = infinity;
  c.sideband_suppression_db = infinity;
  const std::size_t n = 40000;  // 100 kHz bins
  DualPolFrame f{synth_pilot(c, n), synth_pilot(c, n)};
  const auto g = apply_frequency_offset(f, 10e6, c.pilot_freq);
  const auto spec = fft::forward_copy(g.pilot.samples);
  std::size_t best = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (std::norm(spec[k]) > std::norm(spec[best])) best = k;
  EXPECT_NEAR(fft::bin_frequency(best, n, 4e9), 1.010e9, 1.0);
}

TEST(FrequencyOffset, InverseAndIdentity) {
  const auto f = test_frame();
  EXPECT_EQ(apply_frequency_offset(f, 0.0, 1e9).quantum.samples, f.quantum.samples);
  const auto g = apply_frequency_offset(apply_frequency_offset(f, 3.3e6, 1e9), -3.3e6, 1e9);
  EXPECT_LT(max_diff(g.quantum.samples, f.quantum.samples), 1e-9);
  EXPECT_LT(max_diff(g.pilot.samples, f.pilot.samples), 1e-9);
}

TEST(FrequencyOffset, RejectsAlias) {
  const auto f = test_frame();
  EXPECT_THROW(apply_frequency_offset(f, 1.0e9, 1e9), config_error);
  EXPECT_NO_THROW(check_frequency_offset(0.99e9, 4e9, 1e9));
}

TEST(PhaseLock, DifferenceUnchangedByCommonProcesses) {
  const auto f = test_frame();
  Rng rng(9);
  const auto g = apply_frequency_offset(apply_phase_noise(f, 420e3, rng), 7e6, 1e9);
  for (std::size_t n = 0; n < f.quantum.size(); n += 13) {
    const double before = std::arg(f.quantum.samples[n] * std::conj(f.pilot.samples[n]));
    const double after = std::arg(g.quantum.samples[n] * std::conj(g.pilot.samples[n]));
    EXPECT_NEAR(std::remainder(after - before, two_pi), 0, 1e-9);
  }
}

TEST(Composability, LossCommutesWithRotations) {
  const auto f = test_frame();
  Rng a(3), b(3);
  const auto x = apply_loss(apply_frequency_offset(apply_phase_noise(f, 1e5, a), 2e6, 1e9), 0.4);
  const auto y = apply_frequency_offset(apply_phase_noise(apply_loss(f, 0.4), 1e5, b), 2e6, 1e9);
  EXPECT_LT(max_diff(x.quantum.samples, y.quantum.samples), 1e-9);
}

TEST(ExcessNoise, ZeroIsIdentityAndOnlyQuantumGetsNoise) {
  const auto f = test_frame();
  Rng rng(2);
  EXPECT_EQ(inject_excess_noise(f, 0.0, rng).quantum.samples, f.quantum.samples);
  const auto g = inject_excess_noise(f, 0.02, rng);
  EXPECT_EQ(g.pilot.samples, f.pilot.samples);
  EXPECT_THROW(inject_excess_noise(f, -1, rng), config_error);
}

TEST(ExcessNoise, VarianceAndIndependence) {
  DualPolFrame f = test_frame(2032 * 64);
  Rng rng(4);
  const auto g = inject_excess_noise(f, 0.5, rng);
  double vi = 0, vq = 0, cov = 0;
  const auto n = static_cast<double>(f.quantum.size());
  for (std::size_t k = 0; k < f.quantum.size(); ++k) {
    const cplx d = g.quantum.samples[k] - f.quantum.samples[k];
    vi += d.real() * d.real();
    vq += d.imag() * d.imag();
    cov += d.real() * f.quantum.samples[k].real();
  }
  EXPECT_NEAR(vi / n, 0.5, 0.5 * 4 * std::sqrt(2 / n));
  EXPECT_NEAR(vq / n, 0.5, 0.5 * 4 * std::sqrt(2 / n));
  const double sig = std::sqrt(0.5 * mean_power(f.quantum.samples));
  EXPECT_LT(std::abs(cov / n) / (sig * std::sqrt(0.5)), 4 / std::sqrt(n));
}

TEST(Delay, CircularShift) {
  const auto f = test_frame();
  const auto g = apply_delay(f, 5);
  EXPECT_EQ(g.quantum.samples[5], f.quantum.samples[0]);
  EXPECT_EQ(g.pilot.samples[0], f.pilot.samples[f.pilot.size() - 5]);
  EXPECT_EQ(apply_delay(f, static_cast<long long>(f.quantum.size())).quantum.samples, f.quantum.samples);
  EXPECT_THROW(apply_delay(f, -1), config_error);
}

TEST(ApplyChannel, SeededDeterminism) {
  const auto f = test_frame();
  ChannelConfig c;
  c.transmittance = 0.5;
  c.freq_offset = 1e6;
  c.combined_linewidth = 1e5;
  c.injected_excess_noise = 0.01;
  c.delay_samples = 17;
  Rng a(11), b(11);
  const auto x = apply_channel(f, c, 1e9, 0.68, a);
  const auto y = apply_channel(f, c, 1e9, 0.68, b);
  EXPECT_EQ(x.quantum.samples, y.quantum.samples);
  EXPECT_EQ(x.pilot.samples, y.pilot.samples);
}
