#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bwesid/error.hpp"
#include "bwesid/experiments.hpp"
#include "bwesid/synth.hpp"
#include "published_rates.hpp"
#include "test_util.hpp"

namespace bwesid {
namespace {

using testing::TempDir;

// Three synthetic talkers, 8 s of training and two 1 s tests each.
class SmallCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("bwesid-corpus");
    SynthCorpusConfig cfg;
    cfg.speakers = 3;
    cfg.train_seconds = 8.0;
    cfg.test_files = 2;
    cfg.test_seconds = 1.0;
    cfg.seed = 5;
    manifest_ = new CorpusManifest(GenerateCorpus(dir_->path(), cfg));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete dir_;
  }
  static TempDir* dir_;
  static CorpusManifest* manifest_;
};
TempDir* SmallCorpus::dir_ = nullptr;
CorpusManifest* SmallCorpus::manifest_ = nullptr;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Manifest, FormatAndParseRoundTrip) {
  CorpusManifest m;
  m.source_rate = 8000;
  m.train_seconds = 30;
  m.speakers = {{"a", {"a/t1.wav", "a/t2.wav"}, {"a/x.wav"}}, {"b", {"b/t.wav"}, {"b/x.wav", "b/y.wav"}}};
  const CorpusManifest back = ParseManifest(FormatManifest(m), "/data");
  EXPECT_EQ(back.root, std::filesystem::path("/data"));
  EXPECT_EQ(back.source_rate, 8000);
  EXPECT_EQ(back.train_seconds, 30);
  ASSERT_EQ(back.speakers.size(), 2u);
  EXPECT_EQ(back.speakers[1].test_files, m.speakers[1].test_files);
  EXPECT_EQ(back.file_count(), 6u);
  EXPECT_EQ(back.Resolve("a/x.wav"), std::filesystem::path("/data/a/x.wav"));
}

TEST(Manifest, RejectsInvalidCorpora) {
  const std::string head = "source_rate = 16000\n";
  const std::string a = "[speaker a]\ntrain = a1.wav\ntest = a2.wav\n";
  EXPECT_THROW(ParseManifest(head + a, "."), Error);  // one speaker
  EXPECT_THROW(ParseManifest(head + a + a, "."), Error);  // duplicate id
  EXPECT_THROW(ParseManifest(head + a + "[speaker b]\ntrain = b.wav\ntest = a1.wav\n", "."), Error);
  EXPECT_THROW(ParseManifest("colour = blue\n" + a, "."), Error);
  EXPECT_THROW(ParseManifest("source_rate = fast\n", "."), Error);
  EXPECT_THROW(ParseManifest("train = x.wav\n", "."), Error);
  EXPECT_THROW(ParseManifest(head + a + "[speaker b]\ntrain = b.wav\n", "."), Error);  // no tests
  EXPECT_NO_THROW(ParseManifest("# comment\n" + head + a + "\n[speaker b]\ntrain = b1.wav\ntest = b2.wav\n", "."));
}

TEST_F(SmallCorpus, AudioValidationChecksDurations) {
  EXPECT_NO_THROW(manifest_->ValidateAudio());
  CorpusManifest longer = *manifest_;
  longer.train_seconds = 60.0;
  EXPECT_THROW(longer.ValidateAudio(), Error);
  CorpusManifest rate = *manifest_;
  rate.source_rate = 8000;
  EXPECT_THROW(rate.ValidateAudio(), Error);
}

TEST(Rate, TopOneAccuracy) {
  auto decision = [](const std::string& truth, const std::string& top) {
    return Decision{truth, {{top, 0.1}, {"other", 0.2}}};
  };
  EXPECT_DOUBLE_EQ(IdentificationRate({decision("a", "a"), decision("b", "b")}), 100.0);
  EXPECT_DOUBLE_EQ(IdentificationRate({decision("a", "b"), decision("b", "a")}), 0.0);
  EXPECT_DOUBLE_EQ(IdentificationRate({decision("a", "a"), decision("b", "b"), decision("c", "c"),
                                       decision("d", "x"), decision("e", "x")}),
                   60.0);
  EXPECT_THROW(IdentificationRate({}), Error);
}

TEST_F(SmallCorpus, VariantTreesAreCompleteAndIdempotent) {
  TempDir out;
  VariantBuildOptions opt;
  opt.out_root = out.path();
  opt.variants = {Variant::kOrig, Variant::kNb, Variant::kBwe};
  opt.model = &testing::SharedBweModel();
  opt.jobs = 2;
  const VariantBuildReport first = BuildDatabaseVariants(*manifest_, opt);
  EXPECT_EQ(first.written, 27u);
  EXPECT_EQ(first.skipped, 0u);
  for (Variant v : opt.variants) {
    const CorpusManifest vm = VariantManifest(*manifest_, out.path(), v);
    EXPECT_NO_THROW(vm.ValidateAudio());
  }

  const VariantBuildReport again = BuildDatabaseVariants(*manifest_, opt);
  EXPECT_EQ(again.written, 0u);
  EXPECT_EQ(again.skipped, 27u);

  // Changing one source rewrites exactly its three outputs.
  const auto src = manifest_->Resolve(manifest_->speakers[0].test_files[0]);
  AudioBuffer b = ReadWav(src);
  b.samples[100] += 0.01;
  WriteWav(b, src);
  const VariantBuildReport third = BuildDatabaseVariants(*manifest_, opt);
  EXPECT_EQ(third.written, 3u);
}

TEST_F(SmallCorpus, VariantBuildErrors) {
  TempDir out;
  VariantBuildOptions opt;
  opt.out_root = out.path();
  opt.variants = {Variant::kBwe};
  EXPECT_THROW(BuildDatabaseVariants(*manifest_, opt), Error);  // no model
  opt.variants = {Variant::kIsdn};
  EXPECT_THROW(BuildDatabaseVariants(*manifest_, opt), Error);  // rate mismatch
  CorpusManifest missing = *manifest_;
  missing.speakers[1].test_files.push_back("nowhere.wav");
  opt.variants = {Variant::kNb};
  EXPECT_THROW(BuildDatabaseVariants(missing, opt), Error);
}

TEST_F(SmallCorpus, TrainingSetAsTestSetIdentifiesEveryone) {
  SweepConfig cfg;
  cfg.dimensions = {4, 8, 12};
  cfg.test_on_train = true;
  const SweepOutcome out = RunSweep({{"orig", *manifest_}}, cfg);
  ASSERT_EQ(out.results.size(), 3u);
  for (const auto& r : out.results) {
    EXPECT_DOUBLE_EQ(r.rate, 100.0);
    EXPECT_EQ(r.trials, 3);
  }
}

TEST_F(SmallCorpus, SweepShapeAndInvalidCells) {
  SweepConfig cfg;
  cfg.dimensions = {4, 12, 29};  // 29 needs more than the 29 mel filters at 16 kHz
  cfg.frame_ms = {30.0, 15.0};
  const SweepOutcome out = RunSweep({{"a", *manifest_}, {"b", *manifest_}}, cfg);
  EXPECT_EQ(out.results.size() + out.invalid.size(), 2u * 3u * 2u);
  EXPECT_EQ(out.invalid.size(), 4u);
  for (const auto& c : out.invalid) EXPECT_EQ(c.cell.dimension, 29);
  for (const auto& r : out.results) {
    EXPECT_EQ(r.trials, 6);
    EXPECT_GE(r.rate, 0.0);
    EXPECT_LE(r.rate, 100.0);
    EXPECT_EQ(r.cell.fft_len, r.cell.frame_ms == 30.0 ? 512u : 256u);
  }
  EXPECT_EQ(out.trials.size(), out.results.size() * 6);
  const std::string csv = RenderCsv(out.results, out.invalid);
  EXPECT_NE(csv.find("a,MELCEPST,29,30,512,invalid,0"), std::string::npos);
}

TEST_F(SmallCorpus, LpccCellsWithTooFewFramesAreFlagged) {
  SweepConfig cfg;
  cfg.parameterization = Parameterization::kLpcc;
  cfg.dimensions = {8, 100};  // a 1 s test file has fewer than 100 frames
  const SweepOutcome out = RunSweep({{"orig", *manifest_}}, cfg);
  ASSERT_EQ(out.results.size(), 1u);
  ASSERT_EQ(out.invalid.size(), 1u);
  EXPECT_EQ(out.invalid[0].cell.dimension, 100);
  EXPECT_EQ(out.results[0].cell.fft_len, 0u);
}

TEST_F(SmallCorpus, AuditReproducesRatesAndJobsDoNotMatter) {
  SweepConfig cfg;
  cfg.dimensions = {2, 6, 10};
  cfg.jobs = 1;
  const SweepOutcome serial = RunSweep({{"x", *manifest_}}, cfg);
  cfg.jobs = 3;
  const SweepOutcome parallel = RunSweep({{"x", *manifest_}}, cfg);
  EXPECT_EQ(RenderCsv(serial.results), RenderCsv(parallel.results));
  EXPECT_EQ(RenderAudit(serial.trials), RenderAudit(parallel.trials));

  const auto parsed = ParseAudit(RenderAudit(serial.trials));
  ASSERT_EQ(parsed.size(), serial.trials.size());
  const auto recomputed = RatesFromTrials(parsed);
  ASSERT_EQ(recomputed.size(), serial.results.size());
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    EXPECT_EQ(recomputed[i].rate, serial.results[i].rate);
    EXPECT_EQ(recomputed[i].trials, serial.results[i].trials);
  }
}

TEST(Reports, CsvRowCounts) {
  EXPECT_EQ(RenderCsv({}), "variant,param,P,frame_ms,fft_len,rate,trials\n");
  std::vector<ExperimentResult> rows;
  for (const char* v : {"orig", "nb", "bwe"}) {
    for (int p = 1; p <= 18; ++p) rows.push_back({{v, Parameterization::kLpcc, p, 30.0, 0}, 50.0, 10});
  }
  const std::string csv = RenderCsv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 55);
  EXPECT_NE(csv.find("\nnb,LPCC,7,30,0,50.0000,10\n"), std::string::npos);
}

TEST(Reports, TableReproducesThePublishedLayout) {
  const std::string table = RenderTable(testing::PublishedResults());
  std::istringstream in(table);
  std::string header, labels, line;
  std::getline(in, header);
  std::getline(in, labels);
  EXPECT_EQ(header, "P\tFrame length=512 samples\t\t\tFrame length=256 samples\t\t");
  EXPECT_EQ(labels, "\tMIC\tMICb\tMICc\tMIC\tMICb\tMICc");
  bool found = false;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("24\t", 0) == 0) {
      EXPECT_EQ(line, testing::kPublishedRow24);
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(rows, 18);
}

TEST(Reports, PlotFilesDescribeEverySeries) {
  const PlotFiles plot = RenderPlot(testing::PublishedResults(), "rates.dat");
  EXPECT_EQ(std::count(plot.data.begin(), plot.data.end(), '#'), 6);
  EXPECT_NE(plot.script.find("'rates.dat' index 5"), std::string::npos);
  EXPECT_NE(plot.data.find("24 98.3700"), std::string::npos);
}

TEST(Reports, EmitWritesAllFormats) {
  TempDir dir;
  SweepOutcome o;
  o.results = testing::PublishedResults();
  o.trials = {{o.results[0].cell, "a.wav", "a", "a", 0.5}};
  const auto files = EmitReport(o, dir / "r", {ReportFormat::kCsv, ReportFormat::kTable, ReportFormat::kPlotScript});
  EXPECT_EQ(files.size(), 5u);
  for (const char* name : {"results.csv", "audit.csv", "table.txt", "rates.dat", "rates.gp"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "r" / name)) << name;
  }
  EXPECT_EQ(Slurp(dir.path() / "r" / "table.txt"), RenderTable(o.results));
}

TEST(Parallel, RunsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(100, 0);
  ParallelFor(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  EXPECT_THROW(ParallelFor(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

}  // namespace
}  // namespace bwesid
