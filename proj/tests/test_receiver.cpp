#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "intradyne/receiver.hpp"
#include "intradyne/record_io.hpp"
#include "intradyne/wavegen.hpp"

using namespace intradyne;

namespace {

double var(const std::vector<double>& x) {
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

IQTrace vacuum(std::size_t n, double fs = 4e9) {
  IQTrace t;
  t.sample_rate = fs;
  t.samples.assign(n, cplx{});
  return t;
}

}  // namespace

TEST(HybridSplit, InfiniteExtinctionIsIdentity) {
  const auto f = synthesize_transmitter(TxConfig{}, 2032);
  const auto g = hybrid_split(f, infinity);
  EXPECT_EQ(g.quantum.samples, f.quantum.samples);
  EXPECT_EQ(g.pilot.samples, f.pilot.samples);
}

TEST(HybridSplit, TwentyDbLeaksOnePercentOfPower) {
  DualPolFrame f;
  f.quantum = vacuum(64);
  f.pilot = vacuum(64);
  for (auto& s : f.pilot.samples) s = {3.0, -1.0};
  const auto g = hybrid_split(f, 20.0);
  EXPECT_NEAR(mean_power(g.quantum.samples) / mean_power(f.pilot.samples), 1e-2, 1e-12);
}

TEST(HybridSplit, Symmetric) {
  auto f = synthesize_transmitter(TxConfig{}, 2032);
  DualPolFrame swapped{f.pilot, f.quantum};
  const auto a = hybrid_split(f, 15.0);
  const auto b = hybrid_split(swapped, 15.0);
  EXPECT_EQ(a.quantum.samples, b.pilot.samples);
  EXPECT_EQ(a.pilot.samples, b.quantum.samples);
}

TEST(DualQuadratureDetect, VacuumIsOneSnu) {
  Rng rng(1);
  const std::size_t n = 1 << 18;
  const auto q = dual_quadrature_detect(vacuum(n), 0.68, 0.0, rng);
  const double tol = 4 / std::sqrt(static_cast<double>(n)) * std::sqrt(2.0);
  EXPECT_NEAR(var(q.I), 1.0, tol);
  EXPECT_NEAR(var(q.Q), 1.0, tol);
}

TEST(DualQuadratureDetect, ClearanceTwentyDb) {
  RxConfig c;
  EXPECT_NEAR(c.quantum_electronic_noise(), 0.01, 1e-15);
  Rng rng(2);
  const std::size_t n = 1 << 20;
  const auto q = dual_quadrature_detect(vacuum(n), 0.68, c.quantum_electronic_noise(), rng);
  EXPECT_NEAR(var(q.I), 1.01, 4 * 1.01 * std::sqrt(2.0 / n));
}

TEST(DualQuadratureDetect, CoherentVarianceDecomposition) {
  // Output variance = (eta/2) V + 1 + noise for a quadrature variance V input.
  TxConfig tx;
  tx.pulse_shape = PulseShape::rectangular;  // every sample is a symbol-center sample
  tx.v_mod = 4.0;
  const auto m = prbs_symbol_period(0x7f);
  auto t = carve_pulses_periodic(m.symbols, tx, 128);
  Rng rng(3);
  const auto q = dual_quadrature_detect(t, 0.5, 0.01, rng);
  const double expect = 0.25 * 4.0 + 1.01;
  EXPECT_NEAR(var(q.I), expect, 4 * expect * std::sqrt(2.0 / static_cast<double>(t.size())));
  EXPECT_NEAR(var(q.Q), expect, 4 * expect * std::sqrt(2.0 / static_cast<double>(t.size())));
}

TEST(DualQuadratureDetect, LoOffLeavesElectronicsOnly) {
  Rng rng(4);
  const auto q = dual_quadrature_detect(vacuum(1 << 18), 0.68, 0.01, rng, false);
  EXPECT_NEAR(var(q.I), 0.01, 0.01 * 0.02);
}

TEST(CmrrLeakage, Cases) {
  std::vector<double> x(8, 0.5), env(8, 1.0), zero(8, 0.0);
  EXPECT_EQ(cmrr_leakage(x, env, infinity), x);
  EXPECT_EQ(cmrr_leakage(x, zero, 40.0), x);
  const auto y = cmrr_leakage(x, env, 40.0);
  for (double v : y) EXPECT_NEAR(v - 0.5, 0.01, 1e-15);
  EXPECT_THROW(cmrr_leakage(x, std::vector<double>(3), 40.0), config_error);
}

TEST(DetectorRolloff, SinglePoleMagnitude) {
  const std::size_t n = 4000;
  const double fs = 4e9, f0 = 360e6;
  QuadraturePair q;
  for (std::size_t k = 0; k < n; ++k) {
    const double ph = two_pi * f0 * static_cast<double>(k) / fs;
    q.I.push_back(std::cos(ph));
    q.Q.push_back(std::sin(ph));
  }
  detector_rolloff(q, fs, 360e6);
  for (std::size_t k = 0; k < n; k += 101) EXPECT_NEAR(std::hypot(q.I[k], q.Q[k]), 1 / std::sqrt(2.0), 1e-9);
}

TEST(Resample, IdentityAndLinear) {
  std::vector<double> x{0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(resample_uniform(x, 8, 8), x);
  const auto y = resample_uniform(x, 8, 4);
  ASSERT_EQ(y.size(), 4u);
  EXPECT_EQ(y[3], 6.0);
}

TEST(AcquireBlock, DeskScaleBlockHolds4096Symbols) {
  RxConfig c;
  EXPECT_EQ(symbols_per_block(c.block_size_samples, 4e9, 250e6), 4096.0);
  EXPECT_NEAR(symbols_per_block(1 << 20, 20e9, 250e6), 1.31e4, 0.01e4);
}

TEST(AcquireBlock, LengthsSeedAndShortFrame) {
  RxConfig c;
  c.block_size_samples = 4096;
  const auto f = synthesize_transmitter(TxConfig{}, 4096);
  Rng a(7), b(7);
  const auto r1 = acquire_block(f, c, a);
  const auto r2 = acquire_block(f, c, b);
  EXPECT_EQ(r1.size(), 4096u);
  EXPECT_EQ(r1.pilot_Q.size(), 4096u);
  EXPECT_EQ(r1.quantum_I, r2.quantum_I);
  EXPECT_EQ(r1.pilot_Q, r2.pilot_Q);
  c.block_size_samples = 1 << 20;
  EXPECT_THROW(acquire_block(f, c, a), config_error);
}

TEST(AcquireBlock, AdcResampling) {
  RxConfig c;
  c.adc_rate = 2e9;
  c.block_size_samples = 2048;
  const auto need = required_input_samples(c, 4e9);
  EXPECT_EQ(need, 4095u);
  const auto f = synthesize_transmitter(TxConfig{}, need);
  Rng rng(1);
  const auto r = acquire_block(f, c, rng);
  EXPECT_EQ(r.size(), 2048u);
  EXPECT_EQ(r.sample_rate, 2e9);
}

TEST(AcquireBlock, PilotCeilingWarning) {
  RxConfig c;
  c.block_size_samples = 4096;
  c.pilot_power_ceiling = 1e-3;
  const auto f = synthesize_transmitter(TxConfig{}, 4096);
  Rng rng(1);
  EXPECT_FALSE(acquire_block(f, c, rng).warnings.empty());
}

TEST(AcquireCalibration, ShotAndElectronic) {
  RxConfig c;
  c.quantum_bandwidth = 0;
  c.raw_gain = 3.0;
  Rng rng(5);
  const std::size_t n = 1 << 18;
  const auto s = acquire_calibration(c, 4e9, CalibrationKind::shot_noise, n, rng);
  const auto e = acquire_calibration(c, 4e9, CalibrationKind::electronic_noise, n, rng);
  const double unit = c.vacuum_unit(4e9);
  EXPECT_DOUBLE_EQ(unit, 8.0);
  EXPECT_NEAR(var(s.I) / (9 * unit), 1.01, 0.02);
  EXPECT_NEAR(var(e.I) / (9 * unit), 0.01, 0.0005);
}

TEST(RxConfig, Validation) {
  RxConfig c;
  EXPECT_NO_THROW(c.validate());
  c.quantum_efficiency = 0;
  EXPECT_THROW(c.validate(), config_error);
  c = RxConfig{};
  c.cmrr_db = -1;
  EXPECT_THROW(c.validate(), config_error);
}

TEST(RecordIo, BitExactRoundTrip) {
  RxConfig c;
  c.block_size_samples = 1000;
  const auto f = synthesize_transmitter(TxConfig{}, 1000);
  Rng rng(8);
  auto rec = acquire_block(f, c, rng);
  rec.seed = 0xdeadbeefcafef00dULL;
  rec.snu_scale = 1.2345678901234567;
  rec.config_snapshot = R"({"a":1})";
  const auto dir = std::filesystem::temp_directory_path() / "intradyne_record_test";
  std::filesystem::create_directories(dir);
  write_record(rec, dir / "r");
  EXPECT_EQ(std::filesystem::file_size(dir / "r.bin"), 1000u * 32);
  const auto back = read_record(dir / "r");
  EXPECT_EQ(back.quantum_I, rec.quantum_I);
  EXPECT_EQ(back.quantum_Q, rec.quantum_Q);
  EXPECT_EQ(back.pilot_I, rec.pilot_I);
  EXPECT_EQ(back.pilot_Q, rec.pilot_Q);
  EXPECT_EQ(back.seed, rec.seed);
  EXPECT_EQ(back.sample_rate, rec.sample_rate);
  EXPECT_EQ(*back.snu_scale, *rec.snu_scale);
  EXPECT_EQ(back.config_snapshot, rec.config_snapshot);

  std::filesystem::resize_file(dir / "r.bin", 100);
  EXPECT_THROW(read_record(dir / "r"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
