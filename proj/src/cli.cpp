#include "bwesid/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <thread>

#include "bwesid/bwe.hpp"
#include "bwesid/error.hpp"
#include "bwesid/experiments.hpp"
#include "bwesid/features.hpp"
#include "bwesid/synth.hpp"

#ifndef BWESID_VERSION
#define BWESID_VERSION "0.0.0"
#endif

namespace bwesid {
namespace {

constexpr std::uint64_t kDefaultSeed = 20020523;
constexpr const char* kCorpusRootEnv = "BWESID_CORPUS_ROOT";

const std::map<std::string, ChannelSelect> kChannels{
    {"left", ChannelSelect::kLeft}, {"right", ChannelSelect::kRight}, {"mix", ChannelSelect::kMix}};

std::vector<std::string> VariantNames() {
  return {"orig", "nb", "bwe", "isdn", "isdn_bwe"};
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}
  void Info(const std::string& msg) { err_ << "bwesid: " << msg << '\n'; }
  void Warn(const std::string& msg) { err_ << "bwesid: warning: " << msg << '\n'; }

 private:
  std::ostream& err_;
};

std::vector<AudioBuffer> ReadTrainingDirectory(const std::filesystem::path& dir, ChannelSelect channel) {
  if (!std::filesystem::is_directory(dir)) Fail(ErrorKind::kIo, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) Fail(ErrorKind::kInsufficientData, "no .wav files under " + dir.string());
  std::vector<AudioBuffer> out;
  for (const auto& f : files) out.push_back(ReadWav(f, channel));
  return out;
}

BweTrainConfig TrainConfig(int mixtures, std::uint64_t seed, int iterations) {
  BweTrainConfig cfg;
  cfg.em.components = mixtures;
  cfg.em.seed = seed;
  cfg.em.max_iterations = iterations;
  return cfg;
}

ExtendOptions PenaltyOptions(double ratio) {
  ExtendOptions o;
  o.over_penalty = ratio;
  o.under_penalty = 1.0;
  return o;
}

struct Options {
  // filter
  std::string in, out, variant = "nb", model, channel = "left";
  double penalty_ratio = 3.0;
  // bwe train
  std::string corpus_dir;
  int mixtures = 32;
  int iterations = 100;
  std::uint64_t seed = kDefaultSeed;
  // experiment
  std::string manifest, report_dir = "report", work_dir, param = "melcepst";
  std::vector<int> p_list{4, 8, 12, 16, 20, 24};
  std::vector<double> frame_ms{30.0};
  std::vector<std::string> variants;
  std::vector<std::string> formats{"csv", "table", "plot"};
  int jobs = 0;
  // features
  int dimension = 12;
  double preemphasis = 0.95;
  // synth-corpus
  int speakers = 10, test_files = 5, rate = 16000;
  double train_seconds = 60.0, test_seconds = 2.0;
  std::string prefix = "spk";
};

int CmdFilter(const Options& o, Log& log) {
  const Variant v = ParseVariant(o.variant);
  const AudioBuffer in = ReadWav(o.in, kChannels.at(o.channel));
  std::optional<BweModel> model;
  if (VariantNeedsModel(v)) {
    if (o.model.empty()) Fail(ErrorKind::kInvalidArgument, "variant '" + o.variant + "' needs --bwe-model");
    model = LoadBweModel(o.model);
  }
  const AudioBuffer out = MakeVariant(in, v, model ? &*model : nullptr, PenaltyOptions(o.penalty_ratio));
  if (const std::size_t clipped = WriteWav(out, o.out); clipped > 0) {
    log.Warn(std::to_string(clipped) + " samples clipped in " + o.out);
  }
  return kExitOk;
}

int CmdBweTrain(const Options& o, Log& log) {
  const auto buffers = ReadTrainingDirectory(o.corpus_dir, kChannels.at(o.channel));
  log.Info("training on " + std::to_string(buffers.size()) + " files with M=" + std::to_string(o.mixtures));
  const BweModel model = BweTrain(buffers, TrainConfig(o.mixtures, o.seed, o.iterations));
  SaveBweModel(model, o.out);
  log.Info("model written to " + o.out);
  return kExitOk;
}

int CmdBweExtend(const Options& o, Log& log) {
  const AudioBuffer in = ReadWav(o.in, kChannels.at(o.channel));
  const BweModel model = LoadBweModel(o.model);
  const AudioBuffer out = BweExtend(in, model, PenaltyOptions(o.penalty_ratio));
  if (const std::size_t clipped = WriteWav(out, o.out); clipped > 0) {
    log.Warn(std::to_string(clipped) + " samples clipped in " + o.out);
  }
  return kExitOk;
}

int CmdFeatures(const Options& o, Log&) {
  const AudioBuffer in = ReadWav(o.in, kChannels.at(o.channel));
  FeatureConfig cfg;
  cfg.parameterization = ParseParameterization(o.param);
  cfg.dimension = o.dimension;
  cfg.frame_ms = o.frame_ms.front();
  cfg.preemphasis = o.preemphasis;
  WriteFeatureCsv(ExtractFeatures(in, cfg), o.out);
  return kExitOk;
}

int CmdSynthCorpus(const Options& o, Log& log) {
  SynthCorpusConfig cfg;
  cfg.speakers = o.speakers;
  cfg.train_seconds = o.train_seconds;
  cfg.test_files = o.test_files;
  cfg.test_seconds = o.test_seconds;
  cfg.sample_rate_hz = o.rate;
  cfg.seed = o.seed;
  cfg.id_prefix = o.prefix;
  const CorpusManifest m = GenerateCorpus(o.out, cfg);
  log.Info("wrote " + std::to_string(m.file_count()) + " files and manifest.txt to " + o.out);
  return kExitOk;
}

int CmdExperiment(const Options& o, Log& log) {
  std::filesystem::path manifest_path = o.manifest;
  if (manifest_path.empty()) {
    const char* root = std::getenv(kCorpusRootEnv);
    if (root == nullptr || *root == '\0') {
      throw CLI::ValidationError("MANIFEST", std::string("no manifest given and ") + kCorpusRootEnv + " is unset");
    }
    manifest_path = std::filesystem::path(root) / "manifest.txt";
  }
  const CorpusManifest manifest = ReadManifest(manifest_path);
  const ChannelSelect channel = kChannels.at(o.channel);
  manifest.ValidateAudio(channel);

  std::vector<Variant> variants;
  if (o.variants.empty()) {
    if (manifest.source_rate == 8000) {
      variants = {Variant::kIsdn, Variant::kIsdnBwe};
    } else {
      variants = {Variant::kOrig, Variant::kNb, Variant::kBwe};
    }
  } else {
    for (const auto& name : o.variants) variants.push_back(ParseVariant(name));
  }

  const int jobs = o.jobs > 0 ? o.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::optional<BweModel> model;
  if (std::any_of(variants.begin(), variants.end(), VariantNeedsModel)) {
    if (!o.model.empty()) {
      model = LoadBweModel(o.model);
    } else {
      log.Warn("no --bwe-model given; training one on the manifest's training files");
      std::vector<AudioBuffer> train;
      for (const auto& s : manifest.speakers) {
        for (const auto& f : s.train_files) {
          AudioBuffer b = ReadWav(manifest.Resolve(f), channel);
          train.push_back(b.sample_rate_hz == 16000 ? std::move(b) : Upsample2x(b));
        }
      }
      model = BweTrain(train, TrainConfig(o.mixtures, o.seed, o.iterations));
    }
  }

  const std::filesystem::path report_dir = o.report_dir;
  const std::filesystem::path work_dir = o.work_dir.empty() ? report_dir / "variants" : std::filesystem::path(o.work_dir);
  VariantBuildOptions build;
  build.out_root = work_dir;
  build.variants = variants;
  build.model = model ? &*model : nullptr;
  build.extend = PenaltyOptions(o.penalty_ratio);
  build.channel = channel;
  build.jobs = jobs;
  const VariantBuildReport built = BuildDatabaseVariants(manifest, build);
  log.Info("variants: " + std::to_string(built.written) + " files written, " + std::to_string(built.skipped) +
           " up to date");

  std::vector<SweepCorpus> corpora;
  for (Variant v : variants) corpora.push_back({ToString(v), VariantManifest(manifest, work_dir, v)});
  SweepConfig sweep;
  sweep.parameterization = ParseParameterization(o.param);
  sweep.dimensions = o.p_list;
  sweep.frame_ms = o.frame_ms;
  sweep.channel = ChannelSelect::kLeft;
  sweep.jobs = jobs;
  const SweepOutcome outcome = RunSweep(corpora, sweep);
  for (const InvalidCell& c : outcome.invalid) {
    log.Warn("cell " + c.cell.variant + " P=" + std::to_string(c.cell.dimension) + " invalid: " + c.reason);
  }

  std::vector<ReportFormat> formats;
  for (const auto& f : o.formats) {
    formats.push_back(f == "csv" ? ReportFormat::kCsv : f == "table" ? ReportFormat::kTable : ReportFormat::kPlotScript);
  }
  for (const auto& path : EmitReport(outcome, report_dir, formats)) log.Info("wrote " + path.string());
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log(err);
  Options o;
  CLI::App app{"Bandwidth extension and speaker identification toolkit", "bwesid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("{\"name\":\"bwesid\",\"version\":\"") + BWESID_VERSION + "\"}");

  auto channel_opt = [&](CLI::App* cmd) {
    cmd->add_option("--channel", o.channel, "Channel of multi-channel input")
        ->check(CLI::IsMember({"left", "right", "mix"}));
  };
  auto penalty_opt = [&](CLI::App* cmd) {
    cmd->add_option("--penalty-ratio", o.penalty_ratio, "Over/under-estimation cost ratio a/b")
        ->check(CLI::PositiveNumber);
  };
  auto seed_opt = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Seed for all randomness")->capture_default_str();
  };
  auto training_opts = [&](CLI::App* cmd) {
    cmd->add_option("--mixtures,-M", o.mixtures, "Gaussian components")->check(CLI::PositiveNumber);
    cmd->add_option("--iterations", o.iterations, "Maximum EM iterations")->check(CLI::PositiveNumber);
    seed_opt(cmd);
  };

  auto* filter = app.add_subcommand("filter", "Produce one database variant of a file");
  filter->add_option("IN", o.in)->required()->check(CLI::ExistingFile);
  filter->add_option("OUT", o.out)->required();
  filter->add_option("--variant", o.variant)->required()->check(CLI::IsMember(VariantNames()));
  filter->add_option("--bwe-model", o.model)->check(CLI::ExistingFile);
  channel_opt(filter);
  penalty_opt(filter);

  auto* bwe = app.add_subcommand("bwe", "Bandwidth extension");
  bwe->require_subcommand(1);
  auto* train = bwe->add_subcommand("train", "Train a model on 16 kHz wideband speech");
  train->add_option("CORPUS_DIR", o.corpus_dir)->required()->check(CLI::ExistingDirectory);
  train->add_option("MODEL_OUT", o.out)->required();
  training_opts(train);
  channel_opt(train);
  auto* extend = bwe->add_subcommand("extend", "Extend 8 kHz narrowband speech to 16 kHz");
  extend->add_option("IN", o.in)->required()->check(CLI::ExistingFile);
  extend->add_option("MODEL", o.model)->required()->check(CLI::ExistingFile);
  extend->add_option("OUT", o.out)->required();
  penalty_opt(extend);
  channel_opt(extend);

  auto* experiment = app.add_subcommand("experiment", "Closed-set identification sweep over P");
  experiment->add_option("MANIFEST", o.manifest, std::string("Corpus manifest (default: $") + kCorpusRootEnv +
                                                     "/manifest.txt)");
  experiment->add_option("--param", o.param)->check(CLI::IsMember({"lpcc", "melcepst"}))->capture_default_str();
  experiment->add_option("--p-list", o.p_list, "Feature dimensions")->delimiter(',')->check(CLI::PositiveNumber);
  experiment->add_option("--frame-ms", o.frame_ms, "Frame lengths in ms")->delimiter(',')->check(CLI::PositiveNumber);
  experiment->add_option("--report-dir", o.report_dir)->capture_default_str();
  experiment->add_option("--work-dir", o.work_dir, "Where variant trees are written (default: REPORT_DIR/variants)");
  experiment->add_option("--variants", o.variants)->delimiter(',')->check(CLI::IsMember(VariantNames()));
  experiment->add_option("--bwe-model", o.model)->check(CLI::ExistingFile);
  experiment->add_option("--formats", o.formats)->delimiter(',')->check(CLI::IsMember({"csv", "table", "plot"}));
  experiment->add_option("--jobs,-j", o.jobs, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
  training_opts(experiment);
  penalty_opt(experiment);
  channel_opt(experiment);

  auto* features = app.add_subcommand("features", "Dump feature vectors as CSV");
  features->add_option("IN", o.in)->required()->check(CLI::ExistingFile);
  features->add_option("OUT", o.out)->required();
  features->add_option("--param", o.param)->check(CLI::IsMember({"lpcc", "melcepst"}));
  features->add_option("--dimension,-P", o.dimension)->check(CLI::PositiveNumber);
  features->add_option("--frame-ms", o.frame_ms)->delimiter(',')->check(CLI::PositiveNumber);
  features->add_option("--preemphasis", o.preemphasis)->check(CLI::Range(0.0, 0.999));
  channel_opt(features);

  auto* synth = app.add_subcommand("synth-corpus", "Generate a synthetic closed-set corpus");
  synth->add_option("DIR", o.out)->required();
  synth->add_option("--speakers", o.speakers)->check(CLI::Range(2, 999));
  synth->add_option("--train-seconds", o.train_seconds)->check(CLI::PositiveNumber);
  synth->add_option("--test-files", o.test_files)->check(CLI::PositiveNumber);
  synth->add_option("--test-seconds", o.test_seconds)->check(CLI::PositiveNumber);
  synth->add_option("--rate", o.rate)->check(CLI::IsMember({8000, 16000}));
  synth->add_option("--prefix", o.prefix);
  seed_opt(synth);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*filter) return CmdFilter(o, log);
    if (*train) return CmdBweTrain(o, log);
    if (*extend) return CmdBweExtend(o, log);
    if (*experiment) return CmdExperiment(o, log);
    if (*features) return CmdFeatures(o, log);
    if (*synth) return CmdSynthCorpus(o, log);
  } catch (const CLI::ValidationError& e) {
    err << "bwesid: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "bwesid: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace bwesid
