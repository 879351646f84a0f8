#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bwesid/bwe.hpp"
#include "bwesid/cli.hpp"
#include "bwesid/synth.hpp"
#include "test_util.hpp"

namespace bwesid {
namespace {

using testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bwesid");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliFiles : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("bwesid-cli");
    WriteWav(SynthesizeSpeech(RandomVoice(1), 1.0, 16000, 2), dir_->path() / "wb.wav");
    WriteWav(testing::Silence(1.0, 8000), dir_->path() / "silence8k.wav");
    SaveBweModel(testing::SharedBweModel(), dir_->path() / "model.bwem");
    SynthCorpusConfig cfg;
    cfg.speakers = 3;
    cfg.train_seconds = 6.0;
    cfg.test_files = 2;
    cfg.test_seconds = 1.0;
    GenerateCorpus(dir_->path() / "corpus", cfg);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string Path(const std::string& name) { return (dir_->path() / name).string(); }
  static TempDir* dir_;
};
TempDir* CliFiles::dir_ = nullptr;

TEST(Cli, VersionIsMachineReadable) {
  const CliRun r = Cli({"--version"});
  EXPECT_EQ(r.code, kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("name"), "bwesid");
  EXPECT_FALSE(j.at("version").get<std::string>().empty());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(Cli({}).code, kExitUsage);
  EXPECT_EQ(Cli({"dance"}).code, kExitUsage);
  EXPECT_EQ(Cli({"filter", "--frobnicate"}).code, kExitUsage);
  EXPECT_EQ(Cli({"experiment", "m.txt", "--p-list", "4,0"}).code, kExitUsage);
  EXPECT_EQ(Cli({"experiment", "m.txt", "--param", "plp"}).code, kExitUsage);
}

TEST_F(CliFiles, FilterVariants) {
  EXPECT_EQ(Cli({"filter", Path("wb.wav"), Path("nb.wav"), "--variant", "nb"}).code, kExitOk);
  EXPECT_EQ(ReadWav(Path("nb.wav")).size(), ReadWav(Path("wb.wav")).size());
  EXPECT_EQ(Cli({"filter", Path("wb.wav"), Path("x.wav"), "--variant", "bwe", "--bwe-model", Path("model.bwem")}).code,
            kExitOk);
  const CliRun missing = Cli({"filter", Path("nope.wav"), Path("x.wav"), "--variant", "nb"});
  EXPECT_NE(missing.code, kExitOk);
  EXPECT_FALSE(missing.err.empty());
  EXPECT_EQ(Cli({"filter", Path("wb.wav"), Path("x.wav"), "--variant", "mic"}).code, kExitUsage);
  const CliRun needs_model = Cli({"filter", Path("wb.wav"), Path("x.wav"), "--variant", "bwe"});
  EXPECT_EQ(needs_model.code, kExitFailure);
  EXPECT_NE(needs_model.err.find("model"), std::string::npos);
}

TEST_F(CliFiles, ExtendContracts) {
  EXPECT_EQ(Cli({"bwe", "extend", Path("silence8k.wav"), Path("model.bwem"), Path("out.wav")}).code, kExitOk);
  const AudioBuffer out = ReadWav(Path("out.wav"));
  EXPECT_EQ(out.sample_rate_hz, 16000);
  EXPECT_DOUBLE_EQ(out.duration_seconds(), 1.0);
  for (double v : out.samples) ASSERT_EQ(v, 0.0);
  EXPECT_EQ(Cli({"bwe", "extend", Path("wb.wav"), Path("model.bwem"), Path("out2.wav")}).code, kExitFailure);
}

TEST_F(CliFiles, TrainRejectsShortCorporaAndIsSeedDeterministic) {
  const CliRun short_run = Cli({"bwe", "train", Path("corpus"), Path("short.bwem"), "--mixtures", "2"});
  EXPECT_EQ(short_run.code, kExitFailure);
  EXPECT_FALSE(std::filesystem::exists(Path("short.bwem")));

  TempDir long_dir;
  WriteWav(SynthesizeSpeech(RandomVoice(3), 62.0, 16000, 4), long_dir / "a.wav");
  const std::vector<std::string> args{"bwe", "train", long_dir.path().string(), "", "--mixtures", "2",
                                      "--iterations", "5", "--seed", "9"};
  auto first = args, second = args;
  first[3] = (long_dir / "m1.bwem").string();
  second[3] = (long_dir / "m2.bwem").string();
  ASSERT_EQ(Cli(first).code, kExitOk);
  ASSERT_EQ(Cli(second).code, kExitOk);
  EXPECT_EQ(Slurp(first[3]), Slurp(second[3]));
}

TEST_F(CliFiles, ExperimentWritesReportsAndFlagsImpossibleCells) {
  TempDir work;
  const CliRun r = Cli({"experiment", Path("corpus/manifest.txt"), "--param", "lpcc", "--p-list", "4,8,100",
                     "--report-dir", (work / "rep").string(), "--variants", "orig,nb", "--jobs", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = Slurp(work / "rep/results.csv");
  EXPECT_EQ(csv.rfind("variant,param,P,frame_ms,fft_len,rate,trials\n", 0), 0u);
  EXPECT_NE(csv.find("orig,LPCC,100,30,0,invalid,0"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(work / "rep/rates.gp"));
  EXPECT_TRUE(std::filesystem::exists(work / "rep/rates.dat"));
  EXPECT_TRUE(std::filesystem::exists(work / "rep/table.txt"));
}

TEST_F(CliFiles, ExperimentFindsTheCorpusThroughTheEnvironment) {
  TempDir work;
  ::setenv("BWESID_CORPUS_ROOT", Path("corpus").c_str(), 1);
  const CliRun r = Cli({"experiment", "--p-list", "4", "--variants", "orig", "--report-dir", (work / "rep").string(),
                     "--formats", "csv"});
  ::unsetenv("BWESID_CORPUS_ROOT");
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(work / "rep/results.csv"));
  EXPECT_FALSE(std::filesystem::exists(work / "rep/table.txt"));
  EXPECT_EQ(Cli({"experiment", "--p-list", "4"}).code, kExitUsage);
}

TEST_F(CliFiles, FeatureDumpAndCorpusSynthesis) {
  EXPECT_EQ(Cli({"features", Path("wb.wav"), Path("f.csv"), "--param", "lpcc", "-P", "10"}).code, kExitOk);
  EXPECT_EQ(Slurp(Path("f.csv")).rfind("frame,", 0), 0u);
  TempDir out;
  EXPECT_EQ(Cli({"synth-corpus", (out / "c").string(), "--speakers", "2", "--train-seconds", "2",
                 "--test-files", "1", "--test-seconds", "1", "--rate", "8000"})
                .code,
            kExitOk);
  EXPECT_TRUE(std::filesystem::exists(out / "c/manifest.txt"));
  EXPECT_EQ(ReadWav(out / "c/spk01/test_01.wav").sample_rate_hz, 8000);
}

}  // namespace
}  // namespace bwesid
