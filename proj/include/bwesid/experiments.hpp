#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bwesid/bwe.hpp"
#include "bwesid/features.hpp"
#include "bwesid/speaker_id.hpp"

namespace bwesid {

struct SpeakerEntry {
  std::string speaker_id;
  std::vector<std::string> train_files;  // relative to the manifest root
  std::vector<std::string> test_files;
};

// Closed-set corpus description. Text format, one `key = value` per line:
//
//   source_rate = 16000
//   train_seconds = 60
//   test_seconds = 2
//   duration_tolerance = 0.2
//   [speaker spk01]
//   train = spk01/train_01.wav
//   test = spk01/test_01.wav
//
// Blank lines and lines starting with '#' are ignored.
struct CorpusManifest {
  std::filesystem::path root;
  int source_rate = 16000;
  double train_seconds = 60.0;
  double test_seconds = 2.0;
  double duration_tolerance = 0.2;
  std::vector<SpeakerEntry> speakers;

  // At least two speakers, unique ids, no file used for both training and testing.
  void Validate() const;
  // Reads every file and checks rate and durations against the expectations.
  void ValidateAudio(ChannelSelect channel = ChannelSelect::kLeft) const;
  std::size_t file_count() const;
  std::filesystem::path Resolve(const std::string& relative) const { return root / relative; }
};

CorpusManifest ParseManifest(const std::string& text, const std::filesystem::path& root);
CorpusManifest ReadManifest(const std::filesystem::path& path);
std::string FormatManifest(const CorpusManifest& manifest);
void WriteManifest(const CorpusManifest& manifest, const std::filesystem::path& path);

struct VariantBuildOptions {
  std::filesystem::path out_root;
  std::vector<Variant> variants;
  const BweModel* model = nullptr;
  ExtendOptions extend;
  ChannelSelect channel = ChannelSelect::kLeft;
  int jobs = 1;
};

struct VariantBuildReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
};

// Writes <out_root>/<variant>/<relative path> for every manifest file. Files
// whose source content, variant and model are unchanged since the last run
// are skipped (tracked by content hash in <out_root>/<variant>/.bwesid-index).
VariantBuildReport BuildDatabaseVariants(const CorpusManifest& manifest,
                                         const VariantBuildOptions& options);
// Manifest describing the materialised tree of one variant.
CorpusManifest VariantManifest(const CorpusManifest& manifest, const std::filesystem::path& out_root,
                               Variant variant);

struct Decision {
  std::string true_id;
  std::vector<Score> ranking;
};

// 100 * (top-1 correct) / N. Throws on an empty list.
double IdentificationRate(const std::vector<Decision>& decisions);

struct CellKey {
  std::string variant;
  Parameterization parameterization = Parameterization::kMelcepst;
  int dimension = 0;
  double frame_ms = 0.0;
  std::size_t fft_len = 0;  // 0 for LPCC
};

struct ExperimentResult {
  CellKey cell;
  double rate = 0.0;  // percent
  int trials = 0;
};

struct InvalidCell {
  CellKey cell;
  std::string reason;
};

struct TrialRecord {
  CellKey cell;
  std::string test_file;
  std::string true_id;
  std::string predicted_id;
  double distance = 0.0;
};

struct SweepCorpus {
  std::string label;
  CorpusManifest manifest;
};

struct SweepConfig {
  Parameterization parameterization = Parameterization::kMelcepst;
  std::vector<int> dimensions;
  std::vector<double> frame_ms{30.0};
  Overlap overlap{2, 3};
  double preemphasis = 0.95;
  ChannelSelect channel = ChannelSelect::kLeft;
  int jobs = 1;
  // Score the training files instead of the test files (self-consistency runs).
  bool test_on_train = false;
};

struct SweepOutcome {
  std::vector<ExperimentResult> results;  // sorted by cell
  std::vector<InvalidCell> invalid;       // cells that could not be evaluated
  std::vector<TrialRecord> trials;        // one per scored test file, cell order
};

// For every corpus x frame length x P: enroll each speaker on its training
// files, identify every test file, and report the top-1 rate.
SweepOutcome RunSweep(const std::vector<SweepCorpus>& corpora, const SweepConfig& config);

// Recomputes per-cell rates from trial records.
std::vector<ExperimentResult> RatesFromTrials(const std::vector<TrialRecord>& trials);

std::string RenderCsv(const std::vector<ExperimentResult>& results,
                      const std::vector<InvalidCell>& invalid = {});
// P rows by (frame length x variant) columns, tab separated, two decimals.
std::string RenderTable(const std::vector<ExperimentResult>& results);
std::string RenderAudit(const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> ParseAudit(const std::string& text);

struct PlotFiles {
  std::string data;
  std::string script;
};
PlotFiles RenderPlot(const std::vector<ExperimentResult>& results, const std::string& data_name);

enum class ReportFormat { kCsv, kTable, kPlotScript };

// Writes results.csv, table.txt, rates.dat + rates.gp and audit.csv (when
// trials are given) into `dir`. Returns the paths written.
std::vector<std::filesystem::path> EmitReport(const SweepOutcome& outcome,
                                              const std::filesystem::path& dir,
                                              const std::vector<ReportFormat>& formats);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown (lowest index) is rethrown after all workers finish.
void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace bwesid
