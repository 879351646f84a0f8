#include "bwesid/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bwesid/error.hpp"
#include "bwesid/serialize.hpp"

namespace bwesid {
namespace {

constexpr const char* kIndexName = ".bwesid-index";

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  out << text;
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

int OutputRate(Variant v, int source_rate) {
  switch (v) {
    case Variant::kOrig:
    case Variant::kNb: return source_rate;
    case Variant::kIsdn: return 8000;
    case Variant::kBwe:
    case Variant::kIsdnBwe: return 16000;
  }
  return source_rate;
}

std::string CellPrefix(const CellKey& c) {
  return c.variant + "," + ToString(c.parameterization) + "," + std::to_string(c.dimension) + "," +
         Format("%g", c.frame_ms) + "," + std::to_string(c.fft_len);
}

bool SameCell(const CellKey& a, const CellKey& b) {
  return a.variant == b.variant && a.parameterization == b.parameterization &&
         a.dimension == b.dimension && a.frame_ms == b.frame_ms && a.fft_len == b.fft_len;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(n)));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void CorpusManifest::Validate() const {
  if (speakers.size() < 2) Fail(ErrorKind::kInvalidArgument, "a closed-set corpus needs at least two speakers");
  Require(source_rate > 0, "manifest source_rate must be positive");
  std::set<std::string> ids;
  std::set<std::string> train;
  for (const SpeakerEntry& s : speakers) {
    Require(!s.speaker_id.empty(), "speaker id must not be empty");
    Require(ids.insert(s.speaker_id).second, "duplicate speaker id '" + s.speaker_id + "'");
    Require(!s.train_files.empty(), "speaker '" + s.speaker_id + "' has no training files");
    Require(!s.test_files.empty(), "speaker '" + s.speaker_id + "' has no test files");
    train.insert(s.train_files.begin(), s.train_files.end());
  }
  for (const SpeakerEntry& s : speakers) {
    for (const std::string& f : s.test_files) {
      Require(!train.contains(f), "file '" + f + "' is used for both training and testing");
    }
  }
}

void CorpusManifest::ValidateAudio(ChannelSelect channel) const {
  Validate();
  const double lo = 1.0 - duration_tolerance;
  const double hi = 1.0 + duration_tolerance;
  for (const SpeakerEntry& s : speakers) {
    double train_total = 0.0;
    for (const std::string& f : s.train_files) {
      const AudioBuffer b = ReadWav(Resolve(f), channel);
      Require(b.sample_rate_hz == source_rate, f + ": sample rate differs from the manifest");
      train_total += b.duration_seconds();
    }
    if (train_total < lo * train_seconds || train_total > hi * train_seconds) {
      Fail(ErrorKind::kInvalidArgument, "speaker '" + s.speaker_id + "' has " +
                                            Format("%.2f", train_total) + " s of training audio, expected " +
                                            Format("%g", train_seconds) + " s");
    }
    for (const std::string& f : s.test_files) {
      const AudioBuffer b = ReadWav(Resolve(f), channel);
      Require(b.sample_rate_hz == source_rate, f + ": sample rate differs from the manifest");
      const double d = b.duration_seconds();
      if (d < lo * test_seconds || d > hi * test_seconds) {
        Fail(ErrorKind::kInvalidArgument, f + " lasts " + Format("%.2f", d) + " s, expected " +
                                              Format("%g", test_seconds) + " s");
      }
    }
  }
}

std::size_t CorpusManifest::file_count() const {
  std::size_t n = 0;
  for (const SpeakerEntry& s : speakers) n += s.train_files.size() + s.test_files.size();
  return n;
}

CorpusManifest ParseManifest(const std::string& text, const std::filesystem::path& root) {
  CorpusManifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto bad = [&](const std::string& why) {
    Fail(ErrorKind::kMalformedData, "manifest line " + std::to_string(line_no) + ": " + why);
  };
  auto number = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) bad("invalid number '" + v + "'");
      return d;
    } catch (const std::logic_error&) {
      bad("invalid number '" + v + "'");
    }
    return 0.0;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.rfind("[speaker ", 0) != 0) bad("expected [speaker <id>]");
      SpeakerEntry s;
      s.speaker_id = Trim(line.substr(9, line.size() - 10));
      if (s.speaker_id.empty()) bad("empty speaker id");
      m.speakers.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad("expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key == "train" || key == "test") {
      if (m.speakers.empty()) bad("file listed before any [speaker] section");
      if (value.empty()) bad("empty file name");
      (key == "train" ? m.speakers.back().train_files : m.speakers.back().test_files).push_back(value);
    } else if (!m.speakers.empty()) {
      bad("unexpected key '" + key + "' inside a speaker section");
    } else if (key == "source_rate") {
      m.source_rate = static_cast<int>(number(value));
    } else if (key == "train_seconds") {
      m.train_seconds = number(value);
    } else if (key == "test_seconds") {
      m.test_seconds = number(value);
    } else if (key == "duration_tolerance") {
      m.duration_tolerance = number(value);
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  m.Validate();
  return m;
}

CorpusManifest ReadManifest(const std::filesystem::path& path) {
  return ParseManifest(ReadText(path), path.parent_path());
}

std::string FormatManifest(const CorpusManifest& m) {
  std::ostringstream out;
  out << "# bwesid corpus manifest\n";
  out << "source_rate = " << m.source_rate << "\n";
  out << "train_seconds = " << Format("%g", m.train_seconds) << "\n";
  out << "test_seconds = " << Format("%g", m.test_seconds) << "\n";
  out << "duration_tolerance = " << Format("%g", m.duration_tolerance) << "\n";
  for (const SpeakerEntry& s : m.speakers) {
    out << "\n[speaker " << s.speaker_id << "]\n";
    for (const auto& f : s.train_files) out << "train = " << f << "\n";
    for (const auto& f : s.test_files) out << "test = " << f << "\n";
  }
  return out.str();
}

void WriteManifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  WriteText(path, FormatManifest(manifest));
}

CorpusManifest VariantManifest(const CorpusManifest& manifest, const std::filesystem::path& out_root,
                               Variant variant) {
  CorpusManifest m = manifest;
  m.root = out_root / ToString(variant);
  m.source_rate = OutputRate(variant, manifest.source_rate);
  return m;
}

VariantBuildReport BuildDatabaseVariants(const CorpusManifest& manifest,
                                         const VariantBuildOptions& options) {
  manifest.Validate();
  Require(!options.variants.empty(), "no variants requested");
  std::vector<std::string> files;
  for (const SpeakerEntry& s : manifest.speakers) {
    files.insert(files.end(), s.train_files.begin(), s.train_files.end());
    files.insert(files.end(), s.test_files.begin(), s.test_files.end());
  }
  for (const std::string& f : files) {
    if (!std::filesystem::exists(manifest.Resolve(f))) {
      Fail(ErrorKind::kIo, "missing corpus file " + manifest.Resolve(f).string());
    }
  }

  std::uint64_t model_hash = 0;
  for (Variant v : options.variants) {
    if (manifest.source_rate != VariantInputRate(v) && v != Variant::kOrig) {
      Fail(ErrorKind::kInvalidArgument, "variant '" + ToString(v) + "' needs a " +
                                            std::to_string(VariantInputRate(v)) + " Hz corpus");
    }
    if (VariantNeedsModel(v)) {
      if (options.model == nullptr) Fail(ErrorKind::kInvalidArgument, "variant '" + ToString(v) + "' needs a BWE model");
      model_hash = Fnv1a64(EncodeBweModel(*options.model));
    }
  }

  VariantBuildReport report;
  for (Variant v : options.variants) {
    const std::filesystem::path dir = options.out_root / ToString(v);
    std::filesystem::create_directories(dir);
    std::map<std::string, std::string> index;
    if (std::filesystem::exists(dir / kIndexName)) {
      std::istringstream in(ReadText(dir / kIndexName));
      std::string line;
      while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos) index[line.substr(0, tab)] = line.substr(tab + 1);
      }
    }

    std::uint64_t variant_seed = Fnv1a64(ToString(v));
    if (VariantNeedsModel(v)) variant_seed = Fnv1a64(std::to_string(model_hash), variant_seed);
    variant_seed = Fnv1a64(Format("%g", options.extend.over_penalty) + "/" +
                               Format("%g", options.extend.under_penalty) + "/" +
                               std::to_string(static_cast<int>(options.channel)),
                           variant_seed);

    std::vector<std::string> keys(files.size());
    std::vector<char> wrote(files.size(), 0);
    ParallelFor(files.size(), options.jobs, [&](std::size_t i) {
      const std::filesystem::path src = manifest.Resolve(files[i]);
      const std::string content = ReadText(src);
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx",
                    static_cast<unsigned long long>(Fnv1a64(content, variant_seed)));
      keys[i] = buf;
      const std::filesystem::path dst = dir / files[i];
      const auto found = index.find(files[i]);
      if (found != index.end() && found->second == keys[i] && std::filesystem::exists(dst)) return;
      std::filesystem::create_directories(dst.parent_path());
      const AudioBuffer in = ReadWav(src, options.channel);
      WriteWav(MakeVariant(in, v, options.model, options.extend), dst);
      wrote[i] = 1;
    });

    for (std::size_t i = 0; i < files.size(); ++i) {
      index[files[i]] = keys[i];
      (wrote[i] ? report.written : report.skipped) += 1;
    }
    std::ostringstream out;
    for (const auto& [file, key] : index) out << file << '\t' << key << '\n';
    WriteText(dir / kIndexName, out.str());
  }
  return report;
}

double IdentificationRate(const std::vector<Decision>& decisions) {
  Require(!decisions.empty(), "identification rate of an empty decision list");
  std::size_t correct = 0;
  for (const Decision& d : decisions) {
    if (!d.ranking.empty() && d.ranking.front().speaker_id == d.true_id) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(decisions.size());
}

SweepOutcome RunSweep(const std::vector<SweepCorpus>& corpora, const SweepConfig& config) {
  Require(!corpora.empty(), "no corpora to evaluate");
  Require(!config.dimensions.empty(), "no feature dimensions requested");
  Require(!config.frame_ms.empty(), "no frame lengths requested");
  for (int p : config.dimensions) Require(p >= 1, "feature dimension P must be positive");
  for (const SweepCorpus& c : corpora) c.manifest.Validate();

  // Audio, per corpus: speakers x {train, test} buffers.
  struct SpeakerAudio {
    std::vector<AudioBuffer> train;
    std::vector<AudioBuffer> test;
    std::vector<std::string> test_names;
  };
  std::vector<std::vector<SpeakerAudio>> audio(corpora.size());
  struct FileRef {
    std::size_t corpus, speaker, slot;
    bool test;
    std::string name;
  };
  std::vector<FileRef> refs;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    const auto& speakers = corpora[c].manifest.speakers;
    audio[c].resize(speakers.size());
    for (std::size_t s = 0; s < speakers.size(); ++s) {
      const auto& tests = config.test_on_train ? speakers[s].train_files : speakers[s].test_files;
      audio[c][s].train.resize(speakers[s].train_files.size());
      audio[c][s].test.resize(tests.size());
      audio[c][s].test_names = tests;
      for (std::size_t i = 0; i < speakers[s].train_files.size(); ++i) {
        refs.push_back({c, s, i, false, speakers[s].train_files[i]});
      }
      for (std::size_t i = 0; i < tests.size(); ++i) refs.push_back({c, s, i, true, tests[i]});
    }
  }
  ParallelFor(refs.size(), config.jobs, [&](std::size_t i) {
    const FileRef& r = refs[i];
    AudioBuffer b = ReadWav(corpora[r.corpus].manifest.Resolve(r.name), config.channel);
    (r.test ? audio[r.corpus][r.speaker].test : audio[r.corpus][r.speaker].train)[r.slot] = std::move(b);
  });

  auto feature_config = [&](std::size_t frame_index, int p) {
    FeatureConfig fc;
    fc.parameterization = config.parameterization;
    fc.dimension = p;
    fc.frame_ms = config.frame_ms[frame_index];
    fc.overlap = config.overlap;
    fc.preemphasis = config.preemphasis;
    return fc;
  };

  // Mel-cepstra for smaller P are prefixes of those for larger P, so each
  // (corpus, frame length) group is analysed once at the largest usable P.
  const bool mel = config.parameterization == Parameterization::kMelcepst;
  const int max_p = *std::max_element(config.dimensions.begin(), config.dimensions.end());
  const std::size_t n_frames = config.frame_ms.size();
  std::vector<std::vector<FeatureMatrix>> mel_cache(corpora.size() * n_frames);
  std::vector<std::string> group_error(corpora.size() * n_frames);
  std::vector<int> group_cap(corpora.size() * n_frames, max_p);
  if (mel) {
    struct Job {
      std::size_t group, ref;
    };
    std::vector<Job> jobs;
    for (std::size_t g = 0; g < mel_cache.size(); ++g) {
      const std::size_t c = g / n_frames;
      const int cap = DefaultMelFilterCount(corpora[c].manifest.source_rate) - 1;
      group_cap[g] = cap;
      mel_cache[g].resize(refs.size());
      for (std::size_t r = 0; r < refs.size(); ++r) {
        if (refs[r].corpus == c) jobs.push_back({g, r});
      }
    }
    std::vector<std::string> job_error(jobs.size());
    ParallelFor(jobs.size(), config.jobs, [&](std::size_t j) {
      const Job& job = jobs[j];
      const FileRef& r = refs[job.ref];
      const auto& sa = audio[r.corpus][r.speaker];
      const AudioBuffer& b = (r.test ? sa.test : sa.train)[r.slot];
      try {
        const int p = std::min(max_p, group_cap[job.group]);
        mel_cache[job.group][job.ref] = ExtractFeatures(b, feature_config(job.group % n_frames, p));
      } catch (const Error& e) {
        job_error[j] = e.what();
      }
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (!job_error[j].empty() && group_error[jobs[j].group].empty()) group_error[jobs[j].group] = job_error[j];
    }
  }

  struct Cell {
    std::size_t corpus, frame;
    int p;
    CellKey key;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    for (std::size_t f = 0; f < n_frames; ++f) {
      for (int p : config.dimensions) {
        CellKey key;
        key.variant = corpora[c].label;
        key.parameterization = config.parameterization;
        key.dimension = p;
        key.frame_ms = config.frame_ms[f];
        key.fft_len = 0;
        if (mel) {
          try {
            key.fft_len = ResolvedFftLength(feature_config(f, p), corpora[c].manifest.source_rate);
          } catch (const Error&) {
            key.fft_len = 0;
          }
        }
        cells.push_back({c, f, p, key});
      }
    }
  }

  struct CellOutput {
    std::optional<ExperimentResult> result;
    std::optional<InvalidCell> invalid;
    std::vector<TrialRecord> trials;
  };
  std::vector<CellOutput> outputs(cells.size());
  ParallelFor(cells.size(), config.jobs, [&](std::size_t i) {
    const Cell& cell = cells[i];
    CellOutput& out = outputs[i];
    const std::size_t group = cell.corpus * n_frames + cell.frame;
    try {
      auto features_of = [&](std::size_t speaker, bool test, std::size_t slot) -> FeatureMatrix {
        const auto& sa = audio[cell.corpus][speaker];
        const AudioBuffer& b = (test ? sa.test : sa.train)[slot];
        if (!mel) return ExtractFeatures(b, feature_config(cell.frame, cell.p));
        if (!group_error[group].empty()) Fail(ErrorKind::kInvalidArgument, group_error[group]);
        if (cell.p > group_cap[group]) {
          Fail(ErrorKind::kInvalidArgument, "mel-cepstrum dimension " + std::to_string(cell.p) +
                                                " exceeds " + std::to_string(group_cap[group]));
        }
        for (std::size_t r = 0; r < refs.size(); ++r) {
          const FileRef& ref = refs[r];
          if (ref.corpus == cell.corpus && ref.speaker == speaker && ref.test == test && ref.slot == slot) {
            const FeatureMatrix& full = mel_cache[group][r];
            FeatureMatrix sliced;
            sliced.parameterization = full.parameterization;
            sliced.vectors = full.vectors.leftCols(cell.p);
            return sliced;
          }
        }
        Fail(ErrorKind::kInvalidArgument, "internal: missing cached features");
      };

      const auto& speakers = corpora[cell.corpus].manifest.speakers;
      std::vector<SpeakerModel> models;
      for (std::size_t s = 0; s < speakers.size(); ++s) {
        FeatureMatrix pooled;
        pooled.parameterization = config.parameterization;
        std::vector<FeatureMatrix> parts;
        Eigen::Index rows = 0;
        for (std::size_t k = 0; k < audio[cell.corpus][s].train.size(); ++k) {
          parts.push_back(features_of(s, false, k));
          rows += parts.back().vectors.rows();
        }
        pooled.vectors.resize(rows, cell.p);
        Eigen::Index at = 0;
        for (const auto& part : parts) {
          pooled.vectors.middleRows(at, part.vectors.rows()) = part.vectors;
          at += part.vectors.rows();
        }
        models.push_back(Enroll(pooled, speakers[s].speaker_id));
      }

      std::vector<Decision> decisions;
      for (std::size_t s = 0; s < speakers.size(); ++s) {
        const auto& sa = audio[cell.corpus][s];
        for (std::size_t k = 0; k < sa.test.size(); ++k) {
          Decision d{speakers[s].speaker_id, Identify(features_of(s, true, k), models)};
          out.trials.push_back({cell.key, sa.test_names[k], d.true_id, d.ranking.front().speaker_id,
                                d.ranking.front().distance});
          decisions.push_back(std::move(d));
        }
      }
      out.result = ExperimentResult{cell.key, IdentificationRate(decisions),
                                    static_cast<int>(decisions.size())};
    } catch (const Error& e) {
      out.trials.clear();
      out.invalid = InvalidCell{cell.key, e.what()};
    }
  });

  SweepOutcome outcome;
  for (CellOutput& o : outputs) {
    if (o.result) outcome.results.push_back(*o.result);
    if (o.invalid) outcome.invalid.push_back(*o.invalid);
    outcome.trials.insert(outcome.trials.end(), o.trials.begin(), o.trials.end());
  }
  return outcome;
}

std::vector<ExperimentResult> RatesFromTrials(const std::vector<TrialRecord>& trials) {
  std::vector<ExperimentResult> out;
  std::vector<int> correct;
  for (const TrialRecord& t : trials) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ExperimentResult& r) { return SameCell(r.cell, t.cell); });
    if (it == out.end()) {
      out.push_back({t.cell, 0.0, 0});
      correct.push_back(0);
      it = out.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - out.begin());
    ++it->trials;
    if (t.predicted_id == t.true_id) ++correct[idx];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rate = 100.0 * static_cast<double>(correct[i]) / static_cast<double>(out[i].trials);
  }
  return out;
}

std::string RenderCsv(const std::vector<ExperimentResult>& results,
                      const std::vector<InvalidCell>& invalid) {
  std::string out = "variant,param,P,frame_ms,fft_len,rate,trials\n";
  for (const ExperimentResult& r : results) {
    out += CellPrefix(r.cell) + "," + Format("%.4f", r.rate) + "," + std::to_string(r.trials) + "\n";
  }
  for (const InvalidCell& c : invalid) out += CellPrefix(c.cell) + ",invalid,0\n";
  return out;
}

std::string RenderTable(const std::vector<ExperimentResult>& results) {
  struct Group {
    double frame_ms;
    std::size_t fft_len;
  };
  std::vector<Group> groups;
  std::vector<std::string> variants;
  std::set<int> dims;
  for (const ExperimentResult& r : results) {
    const bool known = std::any_of(groups.begin(), groups.end(), [&](const Group& g) {
      return g.frame_ms == r.cell.frame_ms && g.fft_len == r.cell.fft_len;
    });
    if (!known) groups.push_back({r.cell.frame_ms, r.cell.fft_len});
    if (std::find(variants.begin(), variants.end(), r.cell.variant) == variants.end()) {
      variants.push_back(r.cell.variant);
    }
    dims.insert(r.cell.dimension);
  }
  // Longest frames first.
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.fft_len != b.fft_len) return a.fft_len > b.fft_len;
    return a.frame_ms > b.frame_ms;
  });

  std::string out = "P";
  for (const Group& g : groups) {
    out += g.fft_len > 0 ? "\tFrame length=" + std::to_string(g.fft_len) + " samples"
                         : "\tFrame length=" + Format("%g", g.frame_ms) + " ms";
    out += std::string(variants.size() - 1, '\t');
  }
  out += "\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const std::string& v : variants) out += "\t" + v;
  }
  out += "\n";
  for (int p : dims) {
    out += std::to_string(p);
    for (const Group& g : groups) {
      for (const std::string& v : variants) {
        const auto it = std::find_if(results.begin(), results.end(), [&](const ExperimentResult& r) {
          return r.cell.dimension == p && r.cell.variant == v && r.cell.frame_ms == g.frame_ms &&
                 r.cell.fft_len == g.fft_len;
        });
        out += "\t" + (it == results.end() ? std::string("-") : Format("%.2f", it->rate));
      }
    }
    out += "\n";
  }
  return out;
}

std::string RenderAudit(const std::vector<TrialRecord>& trials) {
  std::string out = "variant,param,P,frame_ms,fft_len,test_file,true_id,predicted_id,distance\n";
  for (const TrialRecord& t : trials) {
    out += CellPrefix(t.cell) + "," + t.test_file + "," + t.true_id + "," + t.predicted_id + "," +
           Format("%.17g", t.distance) + "\n";
  }
  return out;
}

std::vector<TrialRecord> ParseAudit(const std::string& text) {
  std::vector<TrialRecord> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const auto f = SplitCsvLine(Trim(line));
    if (f.size() != 9) Fail(ErrorKind::kMalformedData, "audit line has " + std::to_string(f.size()) + " fields");
    TrialRecord t;
    t.cell.variant = f[0];
    t.cell.parameterization = ParseParameterization(f[1]);
    t.cell.dimension = std::stoi(f[2]);
    t.cell.frame_ms = std::stod(f[3]);
    t.cell.fft_len = static_cast<std::size_t>(std::stoul(f[4]));
    t.test_file = f[5];
    t.true_id = f[6];
    t.predicted_id = f[7];
    t.distance = std::stod(f[8]);
    out.push_back(std::move(t));
  }
  return out;
}

PlotFiles RenderPlot(const std::vector<ExperimentResult>& results, const std::string& data_name) {
  struct Series {
    std::string variant;
    double frame_ms;
    std::size_t fft_len;
    std::vector<std::pair<int, double>> points;
  };
  std::vector<Series> series;
  for (const ExperimentResult& r : results) {
    auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) {
      return s.variant == r.cell.variant && s.frame_ms == r.cell.frame_ms && s.fft_len == r.cell.fft_len;
    });
    if (it == series.end()) {
      series.push_back({r.cell.variant, r.cell.frame_ms, r.cell.fft_len, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(r.cell.dimension, r.rate);
  }
  PlotFiles files;
  std::string plot_cmd;
  for (std::size_t i = 0; i < series.size(); ++i) {
    Series& s = series[i];
    std::sort(s.points.begin(), s.points.end());
    const std::string title = s.variant + " " + Format("%g", s.frame_ms) + " ms";
    files.data += "# " + title + "\n";
    for (const auto& [p, rate] : s.points) files.data += std::to_string(p) + " " + Format("%.4f", rate) + "\n";
    files.data += "\n\n";
    plot_cmd += (i == 0 ? "plot " : ", \\\n     ");
    plot_cmd += "'" + data_name + "' index " + std::to_string(i) + " with linespoints title '" + title + "'";
  }
  files.script =
      "set xlabel 'P'\n"
      "set ylabel 'Identification rate (%)'\n"
      "set yrange [0:100]\n"
      "set key bottom right\n"
      "set grid\n";
  files.script += plot_cmd.empty() ? "# no results\n" : plot_cmd + "\n";
  return files;
}

std::vector<std::filesystem::path> EmitReport(const SweepOutcome& outcome,
                                              const std::filesystem::path& dir,
                                              const std::vector<ReportFormat>& formats) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (ReportFormat f : formats) {
    switch (f) {
      case ReportFormat::kCsv:
        WriteText(dir / "results.csv", RenderCsv(outcome.results, outcome.invalid));
        written.push_back(dir / "results.csv");
        if (!outcome.trials.empty()) {
          WriteText(dir / "audit.csv", RenderAudit(outcome.trials));
          written.push_back(dir / "audit.csv");
        }
        break;
      case ReportFormat::kTable:
        WriteText(dir / "table.txt", RenderTable(outcome.results));
        written.push_back(dir / "table.txt");
        break;
      case ReportFormat::kPlotScript: {
        const PlotFiles plot = RenderPlot(outcome.results, "rates.dat");
        WriteText(dir / "rates.dat", plot.data);
        WriteText(dir / "rates.gp", plot.script);
        written.push_back(dir / "rates.dat");
        written.push_back(dir / "rates.gp");
        break;
      }
    }
  }
  return written;
}

}  // namespace bwesid
