#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include "bwesid/error.hpp"
#include "bwesid/features.hpp"
#include "bwesid/spectrum.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace bwesid {
namespace {

TEST(Lpc, LevinsonSolvesTheNormalEquations) {
  const AudioBuffer x = testing::Noise(1.0, 0.03, 8000, 12);
  const int p = 10;
  const auto r = Autocorrelation(x.samples, p);
  const LpcModel m = LevinsonDurbin(r, p);
  ASSERT_EQ(m.order(), p);
  Matrix toeplitz(p, p);
  Vector rhs(p);
  for (int i = 0; i < p; ++i) {
    rhs(i) = r[static_cast<std::size_t>(i + 1)];
    for (int j = 0; j < p; ++j) toeplitz(i, j) = r[static_cast<std::size_t>(std::abs(i - j))];
  }
  const Vector direct = toeplitz.ldlt().solve(rhs);
  for (int i = 0; i < p; ++i) EXPECT_NEAR(m.coefficients[static_cast<std::size_t>(i)], direct(i), 1e-9);
  double err = r[0];
  for (int i = 0; i < p; ++i) err -= direct(i) * rhs(i);
  EXPECT_NEAR(m.gain, err, 1e-9 * r[0]);
  for (double k : m.reflection) EXPECT_LT(std::abs(k), 1.0);
}

TEST(Lpc, ZeroFrameGivesDegenerateModel) {
  const std::vector<double> zeros(240, 0.0);
  const LpcModel m = AutocorrLpc(zeros, 8);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.order(), 8);
  for (double a : m.coefficients) EXPECT_EQ(a, 0.0);
  for (double c : LpcToCepstrum(m, 12)) EXPECT_EQ(c, 0.0);
}

TEST(Lpcc, OnePoleModelGivesPowerSeries) {
  for (int i = 1; i <= 9; ++i) {
    const double alpha = 0.1 * i;
    const auto c = LpcToCepstrum(std::vector<double>{alpha}, 20);
    for (int n = 1; n <= 20; ++n) {
      EXPECT_NEAR(c[static_cast<std::size_t>(n - 1)], std::pow(alpha, n) / n, 1e-10) << alpha << " " << n;
    }
  }
}

TEST(Lpcc, MatchesSpectralBruteForceOnRandomStableModels) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> order(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::RandomStableLpc(rng, order(rng));
    const auto c = LpcToCepstrum(a, 24);
    const auto oracle = oracle::SpectralCepstrum(a, 24);
    for (std::size_t n = 0; n < c.size(); ++n) ASSERT_NEAR(c[n], oracle[n], 1e-6) << trial << " " << n;
  }
}

TEST(Lpcc, CepstrumLengthMayExceedOrder) {
  EXPECT_EQ(LpcToCepstrum(std::vector<double>{0.5, -0.2}, 12).size(), 12u);
}

TEST(Mel, ScaleAndFilterCounts) {
  EXPECT_NEAR(HzToMel(1000.0), 1000.0, 0.1);
  EXPECT_NEAR(MelToHz(HzToMel(3456.0)), 3456.0, 1e-9);
  EXPECT_EQ(DefaultMelFilterCount(8000), 26);
  EXPECT_EQ(DefaultMelFilterCount(16000), 29);
}

TEST(Mel, FlatSpectrumGivesEqualBandEnergies) {
  const MelFilterbank bank(16000, 512, 29, 0.0, 8000.0);
  const std::vector<double> flat(257, 3.0);
  for (double e : bank.Apply(flat)) EXPECT_NEAR(e, 3.0, 1e-12);
}

TEST(Mel, ImpulseHasZeroCepstrum) {
  std::vector<double> impulse(480, 0.0);
  impulse[0] = 1.0;
  for (double c : Melcepst(impulse, 16000, 20, 29, 512)) EXPECT_NEAR(c, 0.0, 1e-9);
}

TEST(Mel, GainOnlyAffectsTheDroppedCoefficient) {
  const AudioBuffer x = testing::Noise(1.0, 0.03, 16000, 13);
  std::vector<double> louder = x.samples;
  for (double& v : louder) v *= 7.5;
  const auto a = Melcepst(x.samples, 16000, 16, 29, 512);
  const auto b = Melcepst(louder, 16000, 16, 29, 512);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Mel, SmallerPIsAPrefix) {
  const AudioBuffer x = testing::Noise(1.0, 0.03, 16000, 14);
  const auto a = Melcepst(x.samples, 16000, 8, 29, 512);
  const auto b = Melcepst(x.samples, 16000, 20, 29, 512);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(Mel, RejectsTooManyCoefficients) {
  const std::vector<double> frame(240, 0.1);
  EXPECT_THROW(Melcepst(frame, 8000, 26, 26, 256), Error);
  EXPECT_THROW(Melcepst(frame, 8000, 12, 26, 128), Error);
}

TEST(Voicing, PeriodicFramesScoreHighNoiseLow) {
  for (double f0 : {90.0, 150.0, 250.0, 380.0}) {
    const AudioBuffer s = testing::Sine(f0, 0.5, 0.03, 8000);
    EXPECT_GT(VoicingDegree(s.samples, 8000), 0.9) << f0;
  }
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const AudioBuffer n = testing::Noise(1.0, 0.03, 8000, 1000 + seed);
    const double v = VoicingDegree(n.samples, 8000);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    mean += v / 200;
  }
  EXPECT_LT(mean, 0.4);
  EXPECT_EQ(VoicingDegree(testing::Silence(0.03, 8000).samples, 8000), 0.0);
  EXPECT_THROW(VoicingDegree(testing::Silence(0.01, 8000).samples, 8000), Error);
}

TEST(EnergyRatio, ClampsAndHandlesEmptyBands) {
  EXPECT_EQ(EnergyRatioDb(0.0, 1.0), kEnergyRatioFloorDb);
  EXPECT_EQ(EnergyRatioDb(1.0, 0.0), kEnergyRatioCeilDb);
  EXPECT_EQ(EnergyRatioDb(0.0, 0.0), kEnergyRatioFloorDb);
  EXPECT_NEAR(EnergyRatioDb(10.0, 1.0), 10.0, 1e-12);
  EXPECT_EQ(EnergyRatioDb(1e-12, 1.0), kEnergyRatioFloorDb);
  EXPECT_EQ(EnergyRatioDb(1e12, 1.0), kEnergyRatioCeilDb);
}

TEST(EnergyRatio, TwoEqualTonesGiveZeroDb) {
  AudioBuffer x = testing::Sine(1000.0, 0.3, 0.032, 16000);
  const AudioBuffer y = testing::Sine(5000.0, 0.3, 0.032, 16000);
  for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += y.samples[i];
  EXPECT_NEAR(BandEnergyRatioDb(x.samples), 0.0, 0.01);
  EXPECT_NEAR(BandEnergyRatioDb(testing::Sine(1000.0, 0.3, 0.032, 16000).samples), kEnergyRatioFloorDb, 1e-9);
}

TEST(HighBandEnvelope, RecoversSmoothShapes) {
  const std::size_t n_bins = 257;
  const BinRange r = HighBandBins(n_bins, 16000);
  EXPECT_EQ(r.first, 109u);  // first bin at or above 3400 Hz
  EXPECT_EQ(r.first + r.count, n_bins);
  const std::vector<double> truth{0.8, -0.3, 0.25, 0.0, -0.1, 0.05, 0.02, -0.01};
  const auto log_mag = HighBandLogEnvelope(truth, r.count);
  std::vector<double> power(n_bins, 1.0);
  for (std::size_t b = 0; b < r.count; ++b) power[r.first + b] = std::exp(2.0 * (log_mag[b] + 1.7));
  const auto c = HighBandEnvelopeCepstrum(power, 16000, 8);
  for (std::size_t k = 0; k < truth.size(); ++k) EXPECT_NEAR(c[k], truth[k], 1e-10);
}

TEST(Extraction, ShapesFollowTheConfiguration) {
  const AudioBuffer x = testing::Noise(0.1, 2.0, 16000, 21);
  FeatureConfig cfg;
  cfg.dimension = 16;
  const FeatureMatrix mel30 = ExtractFeatures(x, cfg);
  EXPECT_EQ(mel30.dimension(), 16);
  EXPECT_EQ(mel30.frame_count(), static_cast<int>(FrameCount(x.size(), {480, 160})));
  EXPECT_EQ(ResolvedFftLength(cfg, 16000), 512u);
  cfg.frame_ms = 15.0;
  EXPECT_EQ(ResolvedFftLength(cfg, 16000), 256u);
  const FeatureMatrix mel15 = ExtractFeatures(x, cfg);
  EXPECT_NEAR(double(mel15.frame_count()) / mel30.frame_count(), 2.0, 0.03);
  cfg.parameterization = Parameterization::kLpcc;
  cfg.dimension = 24;
  const FeatureMatrix lpcc = ExtractFeatures(x, cfg);
  EXPECT_EQ(lpcc.dimension(), 24);
  EXPECT_TRUE(lpcc.vectors.allFinite());
  cfg.dimension = 0;
  EXPECT_THROW(ExtractFeatures(x, cfg), Error);
}

TEST(Extraction, LpccOfAnArProcessApproachesTheModelCepstrum) {
  // x[n] = 0.9 x[n-1] + e[n]; with no pre-emphasis the frame-averaged first
  // coefficient is close to the model's c_1 = 0.9.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.01);
  AudioBuffer x;
  x.sample_rate_hz = 8000;
  x.samples.resize(16000);
  double prev = 0;
  for (double& v : x.samples) v = prev = 0.9 * prev + g(rng);
  FeatureConfig cfg;
  cfg.parameterization = Parameterization::kLpcc;
  cfg.dimension = 1;
  cfg.preemphasis = 0.0;
  const FeatureMatrix f = ExtractFeatures(x, cfg);
  EXPECT_NEAR(f.vectors.col(0).mean(), 0.9, 0.05);
}

TEST(Extraction, ParameterizationNames) {
  EXPECT_EQ(ParseParameterization("LPCC"), Parameterization::kLpcc);
  EXPECT_EQ(ParseParameterization("melcepst"), Parameterization::kMelcepst);
  EXPECT_EQ(ToString(Parameterization::kMelcepst), "MELCEPST");
  EXPECT_THROW(ParseParameterization("plp"), Error);
}

TEST(Extraction, CsvDumpHasHeaderAndOneRowPerFrame) {
  testing::TempDir dir;
  FeatureConfig cfg;
  cfg.dimension = 3;
  const FeatureMatrix f = ExtractFeatures(testing::Noise(0.1, 0.2, 8000, 1), cfg);
  WriteFeatureCsv(f, dir / "f.csv");
  std::ifstream in(dir / "f.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("frame,", 0), 0u);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, f.frame_count());
}

}  // namespace
}  // namespace bwesid
