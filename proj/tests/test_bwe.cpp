#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "bwesid/bwe.hpp"
#include "bwesid/dsp.hpp"
#include "bwesid/error.hpp"
#include "bwesid/synth.hpp"
#include "test_util.hpp"

namespace bwesid {
namespace {

using testing::BandPowerDb;
using testing::SharedBweModel;

AudioBuffer NarrowbandSpeech(std::uint64_t voice, double seconds, std::uint64_t seed) {
  return Downsample2x(PotsbandFilter(SynthesizeSpeech(RandomVoice(voice), seconds, 16000, seed)));
}

TEST(BweModelLayout, SplitsCoverTheJointVector) {
  const BweModel& m = SharedBweModel();
  EXPECT_EQ(m.dimension(), 25);
  EXPECT_EQ(m.features.joint_dim(), 25);
  const BlockSplit e = m.EnergySplit();
  EXPECT_EQ(e.x_dims.size(), 16u);
  EXPECT_EQ(e.y_dims, std::vector<int>{24});
  const BlockSplit v = m.EnvelopeSplit();
  EXPECT_EQ(v.x_dims.size(), 17u);
  EXPECT_EQ(v.y_dims.size(), 8u);
  EXPECT_NO_THROW(v.Validate(25));
}

TEST(BweTraining, JointVectorsHaveTheDocumentedLayout) {
  const AudioBuffer wb = SynthesizeSpeech(RandomVoice(3), 3.0, 16000, 4);
  const JointFrames j = JointTrainingVectors(wb, BweFeatureConfig{});
  EXPECT_EQ(j.vectors.cols(), 25);
  EXPECT_EQ(static_cast<std::size_t>(j.vectors.rows()), j.narrow_energy.size());
  EXPECT_GT(j.vectors.rows(), 250);
  for (Eigen::Index t = 0; t < j.vectors.rows(); ++t) {
    EXPECT_GE(j.vectors(t, 15), 0.0);  // voicing
    EXPECT_LE(j.vectors(t, 15), 1.0);
    EXPECT_GE(j.vectors(t, 24), kEnergyRatioFloorDb);
    EXPECT_LE(j.vectors(t, 24), kEnergyRatioCeilDb);
  }
}

TEST(BweTraining, RejectsShortSilentOrWrongRateCorpora) {
  BweTrainConfig cfg;
  cfg.em.components = 2;
  try {
    BweTrain({SynthesizeSpeech(RandomVoice(1), 20.0, 16000, 2)}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
  EXPECT_THROW(BweTrain({testing::Silence(61.0, 16000)}, cfg), Error);
  EXPECT_THROW(BweTrain({testing::Silence(61.0, 8000)}, cfg), Error);
}

TEST(BweExtension, OutputDoublesTheRateAndKeepsTheDuration) {
  const AudioBuffer nb = NarrowbandSpeech(5, 1.3, 6);
  const AudioBuffer wb = BweExtend(nb, SharedBweModel());
  EXPECT_EQ(wb.sample_rate_hz, 16000);
  EXPECT_EQ(wb.size(), 2 * nb.size());
  EXPECT_TRUE(std::all_of(wb.samples.begin(), wb.samples.end(), [](double v) { return std::isfinite(v); }));
}

TEST(BweExtension, SilenceMapsToSilence) {
  const ExtendResult r = BweExtendDetailed(testing::Silence(1.0, 8000), SharedBweModel());
  for (double v : r.audio.samples) ASSERT_EQ(v, 0.0);
  for (const FrameReport& f : r.frames) EXPECT_FALSE(f.active);
}

TEST(BweExtension, RequiresNarrowbandInput) {
  EXPECT_THROW(BweExtend(testing::Silence(1.0, 16000), SharedBweModel()), Error);
  ExtendOptions bad;
  bad.over_penalty = 0.0;
  EXPECT_THROW(BweExtend(testing::Silence(1.0, 8000), SharedBweModel(), bad), Error);
}

TEST(BweExtension, AddsHighBandAndPreservesTheNarrowband) {
  const AudioBuffer nb = NarrowbandSpeech(7, 4.0, 8);
  const AudioBuffer base = Upsample2x(nb);
  const AudioBuffer wb = BweExtend(nb, SharedBweModel());
  for (double centre : {400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0}) {
    const double lo = centre * std::pow(2.0, -1.0 / 6.0), hi = centre * std::pow(2.0, 1.0 / 6.0);
    EXPECT_NEAR(BandPowerDb(wb.samples, 16000, lo, hi), BandPowerDb(base.samples, 16000, lo, hi), 1.0) << centre;
  }
  EXPECT_GT(BandPowerDb(wb.samples, 16000, 4000, 7500), BandPowerDb(base.samples, 16000, 4000, 7500) + 20.0);
}

TEST(BweExtension, TelephoneBandOfTheOutputMatchesTheUpsampledInput) {
  const AudioBuffer nb = NarrowbandSpeech(15, 3.0, 16);
  const AudioBuffer a = PotsbandFilter(BweExtend(nb, SharedBweModel()));
  const AudioBuffer b = PotsbandFilter(Upsample2x(nb));
  for (double centre : {500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0}) {
    const double lo = centre * std::pow(2.0, -1.0 / 6.0), hi = centre * std::pow(2.0, 1.0 / 6.0);
    EXPECT_NEAR(BandPowerDb(a.samples, 16000, lo, hi), BandPowerDb(b.samples, 16000, lo, hi), 1.0) << centre;
  }
}

TEST(BweExtension, OutputEnergyStaysBounded) {
  for (std::uint64_t voice : {17u, 18u, 19u}) {
    const AudioBuffer nb = NarrowbandSpeech(voice, 2.0, voice + 100);
    const AudioBuffer wb = BweExtend(nb, SharedBweModel());
    double in = 0, out = 0;
    for (double v : nb.samples) in += v * v;
    for (double v : wb.samples) out += v * v;
    EXPECT_LE(std::sqrt(out / static_cast<double>(wb.size())), 2.0 * std::sqrt(in / static_cast<double>(nb.size())))
        << voice;
  }
}

TEST(BweExtension, ActiveFramesHitTheEstimatedRatio) {
  const ExtendResult r = BweExtendDetailed(NarrowbandSpeech(9, 3.0, 10), SharedBweModel());
  int active = 0;
  for (const FrameReport& f : r.frames) {
    if (!f.active) continue;
    ++active;
    EXPECT_NEAR(f.achieved_ratio_db, f.estimated_ratio_db, 1.0);
  }
  EXPECT_GT(active, 100);
}

TEST(BweExtension, HeavierOverEstimationPenaltyLowersTheEstimate) {
  const AudioBuffer nb = NarrowbandSpeech(11, 1.5, 12);
  ExtendOptions mild, harsh;
  mild.over_penalty = 1.0;
  harsh.over_penalty = 10.0;
  const auto a = BweExtendDetailed(nb, SharedBweModel(), mild).frames;
  const auto b = BweExtendDetailed(nb, SharedBweModel(), harsh).frames;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].active && b[i].active) EXPECT_LE(b[i].estimated_ratio_db, a[i].estimated_ratio_db + 1e-9);
  }
}

TEST(BweExtension, IsDeterministic) {
  const AudioBuffer nb = NarrowbandSpeech(13, 1.0, 14);
  EXPECT_EQ(BweExtend(nb, SharedBweModel()).samples, BweExtend(nb, SharedBweModel()).samples);
}

TEST(BweModelFile, RoundTripAndCorruption) {
  const BweModel& m = SharedBweModel();
  const auto bytes = EncodeBweModel(m);
  const BweModel back = DecodeBweModel(bytes);
  EXPECT_EQ(EncodeBweModel(back), bytes);
  EXPECT_TRUE(back.features == m.features);

  testing::TempDir dir;
  SaveBweModel(m, dir / "m.bwem");
  EXPECT_EQ(EncodeBweModel(LoadBweModel(dir / "m.bwem")), bytes);

  auto broken = bytes;
  broken[broken.size() / 2] ^= 0x40;
  EXPECT_THROW(DecodeBweModel(broken), Error);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(DecodeBweModel(version), Error);
}

TEST(Variants, NamesAndRates) {
  for (const char* name : {"orig", "nb", "bwe", "isdn", "isdn_bwe"}) EXPECT_EQ(ToString(ParseVariant(name)), name);
  EXPECT_THROW(ParseVariant("mic"), Error);
  EXPECT_TRUE(VariantNeedsModel(Variant::kBwe));
  EXPECT_FALSE(VariantNeedsModel(Variant::kNb));
  EXPECT_EQ(VariantInputRate(Variant::kIsdn), 8000);
}

TEST(Variants, ProduceTheDocumentedSignals) {
  const AudioBuffer wb = SynthesizeSpeech(RandomVoice(15), 1.0, 16000, 16);
  EXPECT_EQ(MakeVariant(wb, Variant::kOrig, nullptr).samples, wb.samples);

  const AudioBuffer nb = MakeVariant(wb, Variant::kNb, nullptr);
  EXPECT_EQ(nb.sample_rate_hz, 16000);
  const AudioBuffer tone = testing::Sine(5000.0, 0.5, 1.0, 16000);
  const AudioBuffer filtered = MakeVariant(tone, Variant::kNb, nullptr);
  EXPECT_LE(BandPowerDb(filtered.samples, 16000, 4900, 5100) - BandPowerDb(tone.samples, 16000, 4900, 5100), -30.0);

  const AudioBuffer bwe = MakeVariant(wb, Variant::kBwe, &SharedBweModel());
  EXPECT_EQ(bwe.sample_rate_hz, 16000);
  EXPECT_EQ(bwe.size(), wb.size());
  EXPECT_THROW(MakeVariant(wb, Variant::kBwe, nullptr), Error);

  const AudioBuffer nb8 = Downsample2x(wb);
  const AudioBuffer isdn = MakeVariant(nb8, Variant::kIsdn, nullptr);
  EXPECT_EQ(isdn.samples, AlawRoundTrip(nb8).samples);
  EXPECT_THROW(MakeVariant(wb, Variant::kIsdn, nullptr), Error);
  const AudioBuffer isdn_bwe = MakeVariant(nb8, Variant::kIsdnBwe, &SharedBweModel());
  EXPECT_EQ(isdn_bwe.sample_rate_hz, 16000);
  EXPECT_EQ(isdn_bwe.size(), 2 * nb8.size());
}

}  // namespace
}  // namespace bwesid
