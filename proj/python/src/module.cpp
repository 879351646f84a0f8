#include <algorithm>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bwesid/audio_io.hpp"
#include "bwesid/bwe.hpp"
#include "bwesid/cli.hpp"
#include "bwesid/density.hpp"
#include "bwesid/dsp.hpp"
#include "bwesid/error.hpp"
#include "bwesid/experiments.hpp"
#include "bwesid/features.hpp"
#include "bwesid/speaker_id.hpp"
#include "bwesid/synth.hpp"

namespace py = pybind11;
using namespace bwesid;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioBuffer ToBuffer(const Samples& samples, int rate) {
  AudioBuffer b;
  b.sample_rate_hz = rate;
  b.samples.assign(samples.data(), samples.data() + samples.size());
  return b;
}

template <typename T>
py::array_t<T> ToArray(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::string KindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kUnsupportedFormat: return "unsupported_format";
    case ErrorKind::kMalformedData: return "malformed_data";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "unknown";
}

py::dict ResultDict(const ExperimentResult& r) {
  py::dict d;
  d["variant"] = r.cell.variant;
  d["parameterization"] = ToString(r.cell.parameterization);
  d["dimension"] = r.cell.dimension;
  d["frame_ms"] = r.cell.frame_ms;
  d["fft_len"] = r.cell.fft_len;
  d["rate"] = r.rate;
  d["trials"] = r.trials;
  return d;
}

}  // namespace

PYBIND11_MODULE(_bwesid, m) {
  m.doc() = "Bandwidth extension and covariance speaker identification";

  // Module-lifetime reference, deliberately never released.
  static const py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type.ptr(), ("[" + KindName(e.kind()) + "] " + e.what()).c_str());
    }
  });

  py::enum_<ChannelSelect>(m, "Channel")
      .value("LEFT", ChannelSelect::kLeft)
      .value("RIGHT", ChannelSelect::kRight)
      .value("MIX", ChannelSelect::kMix);

  // Audio I/O. Audio crosses the boundary as (samples, sample_rate) pairs.
  m.def(
      "read_wav",
      [](const std::filesystem::path& path, ChannelSelect channel) {
        const AudioBuffer b = ReadWav(path, channel);
        return py::make_tuple(ToArray(b.samples), b.sample_rate_hz);
      },
      py::arg("path"), py::arg("channel") = ChannelSelect::kLeft, "Returns (samples in [-1, 1), sample_rate).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const Samples& samples, int rate) {
        return WriteWav(ToBuffer(samples, rate), path);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"), "Writes 16-bit PCM; returns the clipped count.");
  m.def(
      "alaw_encode",
      [](const Samples& samples) {
        const auto codes = AlawEncodeBuffer(ToBuffer(samples, 8000));
        return ToArray(codes);
      },
      py::arg("samples"));
  m.def(
      "alaw_decode",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& codes) {
        return ToArray(AlawDecodeBuffer({codes.data(), static_cast<std::size_t>(codes.size())}).samples);
      },
      py::arg("codes"));
  m.def("alaw_encode_sample", &AlawEncode, py::arg("linear"));
  m.def("alaw_decode_sample", &AlawDecode, py::arg("code"));

  // Signal processing.
  m.def(
      "potsband_filter",
      [](const Samples& s, int rate) { return ToArray(PotsbandFilter(ToBuffer(s, rate)).samples); },
      py::arg("samples"), py::arg("sample_rate"));
  m.def(
      "upsample2x", [](const Samples& s) { return ToArray(Upsample2x(ToBuffer(s, 8000)).samples); },
      py::arg("samples"), "8 kHz to 16 kHz.");
  m.def(
      "downsample2x", [](const Samples& s) { return ToArray(Downsample2x(ToBuffer(s, 16000)).samples); },
      py::arg("samples"), "16 kHz to 8 kHz.");

  // Features.
  m.def(
      "lpc",
      [](const Samples& frame, int order) {
        const LpcModel lpc = AutocorrLpc({frame.data(), static_cast<std::size_t>(frame.size())}, order);
        return py::make_tuple(ToArray(lpc.coefficients), lpc.gain);
      },
      py::arg("frame"), py::arg("order"), "Returns (a, residual energy) with A(z) = 1 - sum a_k z^-k.");
  m.def(
      "lpc_to_cepstrum",
      [](const Samples& a, int n) { return ToArray(LpcToCepstrum({a.data(), static_cast<std::size_t>(a.size())}, n)); },
      py::arg("a"), py::arg("n_ceps"));
  m.def(
      "extract_features",
      [](const Samples& s, int rate, const std::string& param, int dimension, double frame_ms, double preemphasis) {
        FeatureConfig cfg;
        cfg.parameterization = ParseParameterization(param);
        cfg.dimension = dimension;
        cfg.frame_ms = frame_ms;
        cfg.preemphasis = preemphasis;
        return ExtractFeatures(ToBuffer(s, rate), cfg).vectors;
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("param") = "melcepst", py::arg("dimension") = 12,
      py::arg("frame_ms") = 30.0, py::arg("preemphasis") = 0.95, "Returns a frames x dimension matrix.");

  // Mixture density.
  py::class_<Gmm>(m, "Gmm")
      .def(py::init([](const Vector& w, const RowMatrix& mu, const std::vector<Matrix>& cov) {
             Gmm g{w, mu, cov};
             g.Validate();
             return g;
           }),
           py::arg("weights"), py::arg("means"), py::arg("covariances"))
      .def_readonly("weights", &Gmm::weights)
      .def_readonly("means", &Gmm::means)
      .def_readonly("covariances", &Gmm::covariances)
      .def_property_readonly("components", &Gmm::components)
      .def_property_readonly("dimension", &Gmm::dimension)
      .def("log_pdf", [](const Gmm& g, const RowMatrix& x) -> Vector { return GmmLogPdfRows(g, x); }, py::arg("x"))
      .def(
          "conditional_mean",
          [](const Gmm& g, const std::vector<int>& given, const std::vector<int>& target, const std::vector<double>& x) {
            return ConditionalMmse(g, BlockSplit{given, target}, x);
          },
          py::arg("given"), py::arg("target"), py::arg("x"))
      .def(
          "conditional_quantile",
          [](const Gmm& g, const std::vector<int>& given, int target, const std::vector<double>& x, double q) {
            return ConditionalMixture(g, BlockSplit{given, {target}}).Quantile(x, q);
          },
          py::arg("given"), py::arg("target"), py::arg("x"), py::arg("q"));
  m.def(
      "em_fit",
      [](const RowMatrix& data, int components, int max_iterations, double tolerance, std::uint64_t seed) {
        EmConfig cfg;
        cfg.components = components;
        cfg.max_iterations = max_iterations;
        cfg.tolerance = tolerance;
        cfg.seed = seed;
        EmResult r = EmFit(data, cfg);
        return py::make_tuple(std::move(r.model), r.log_likelihood);
      },
      py::arg("data"), py::arg("components"), py::arg("max_iterations") = 100, py::arg("tolerance") = 1e-6,
      py::arg("seed") = 0, "Returns (model, mean log-likelihood per iteration).");

  // Bandwidth extension.
  py::class_<BweModel>(m, "BweModel")
      .def_property_readonly("dimension", &BweModel::dimension)
      .def_property_readonly("components", [](const BweModel& b) { return b.joint.components(); })
      .def_readonly("joint", &BweModel::joint)
      .def("save", [](const BweModel& b, const std::filesystem::path& p) { SaveBweModel(b, p); }, py::arg("path"))
      .def_static("load", &LoadBweModel, py::arg("path"));
  m.def(
      "bwe_train",
      [](const std::vector<Samples>& wideband, int mixtures, int iterations, std::uint64_t seed) {
        std::vector<AudioBuffer> audio;
        for (const auto& s : wideband) audio.push_back(ToBuffer(s, 16000));
        BweTrainConfig cfg;
        cfg.em.components = mixtures;
        cfg.em.max_iterations = iterations;
        cfg.em.seed = seed;
        py::gil_scoped_release release;
        return BweTrain(audio, cfg);
      },
      py::arg("wideband"), py::arg("mixtures") = 32, py::arg("iterations") = 100, py::arg("seed") = 20020523,
      "Trains on 16 kHz recordings (at least 60 s in total).");
  m.def(
      "bwe_extend",
      [](const Samples& narrowband, const BweModel& model, double over_penalty, double under_penalty) {
        const AudioBuffer in = ToBuffer(narrowband, 8000);
        AudioBuffer out;
        {
          py::gil_scoped_release release;
          out = BweExtend(in, model, ExtendOptions{over_penalty, under_penalty});
        }
        return ToArray(out.samples);
      },
      py::arg("narrowband"), py::arg("model"), py::arg("over_penalty") = 3.0, py::arg("under_penalty") = 1.0,
      "8 kHz telephone speech to 16 kHz.");
  m.def(
      "make_variant",
      [](const Samples& s, int rate, const std::string& variant, const BweModel* model) {
        return ToArray(MakeVariant(ToBuffer(s, rate), ParseVariant(variant), model).samples);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("variant"), py::arg("model") = nullptr,
      "variant: orig, nb, bwe, isdn or isdn_bwe.");

  // Speaker identification.
  py::class_<SpeakerModel>(m, "SpeakerModel")
      .def_readonly("speaker_id", &SpeakerModel::speaker_id)
      .def_readonly("covariance", &SpeakerModel::covariance)
      .def_readonly("frame_count", &SpeakerModel::frame_count);
  m.def(
      "enroll",
      [](const RowMatrix& features, const std::string& id) {
        return SpeakerModel{id, EstimateCovariance(features), static_cast<int>(features.rows())};
      },
      py::arg("features"), py::arg("speaker_id"));
  m.def("sphericity", &Sphericity, py::arg("test_cov"), py::arg("model_cov"));
  m.def(
      "identify",
      [](const RowMatrix& features, const std::vector<SpeakerModel>& models) {
        std::vector<std::pair<std::string, double>> out;
        for (const Score& s : IdentifyCovariance(EstimateCovariance(features), models))
          out.emplace_back(s.speaker_id, s.distance);
        return out;
      },
      py::arg("features"), py::arg("models"), "Returns (speaker_id, distance) pairs, best first.");

  // Experiments.
  m.def(
      "synth_corpus",
      [](const std::filesystem::path& dir, int speakers, double train_seconds, int test_files, double test_seconds,
         int rate, std::uint64_t seed) {
        SynthCorpusConfig cfg;
        cfg.speakers = speakers;
        cfg.train_seconds = train_seconds;
        cfg.test_files = test_files;
        cfg.test_seconds = test_seconds;
        cfg.sample_rate_hz = rate;
        cfg.seed = seed;
        GenerateCorpus(dir, cfg);
        return dir / "manifest.txt";
      },
      py::arg("dir"), py::arg("speakers") = 10, py::arg("train_seconds") = 60.0, py::arg("test_files") = 5,
      py::arg("test_seconds") = 2.0, py::arg("sample_rate") = 16000, py::arg("seed") = 20020523,
      "Writes a synthetic corpus and returns the manifest path.");
  m.def(
      "run_sweep",
      [](const std::map<std::string, std::filesystem::path>& manifests, const std::string& param,
         const std::vector<int>& dims, const std::vector<double>& frame_ms, int jobs) {
        std::vector<SweepCorpus> corpora;
        for (const auto& [label, path] : manifests) corpora.push_back({label, ReadManifest(path)});
        SweepConfig cfg;
        cfg.parameterization = ParseParameterization(param);
        cfg.dimensions = dims;
        cfg.frame_ms = frame_ms;
        cfg.jobs = jobs;
        SweepOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = RunSweep(corpora, cfg);
        }
        py::list results;
        for (const auto& r : outcome.results) results.append(ResultDict(r));
        py::list invalid;
        for (const auto& c : outcome.invalid) {
          py::dict d = ResultDict({c.cell, 0.0, 0});
          d["reason"] = c.reason;
          invalid.append(d);
        }
        return py::make_tuple(results, invalid, RenderTable(outcome.results));
      },
      py::arg("manifests"), py::arg("param") = "melcepst", py::arg("dimensions") = std::vector<int>{4, 8, 12, 16, 20, 24},
      py::arg("frame_ms") = std::vector<double>{30.0}, py::arg("jobs") = 1,
      "manifests maps a variant label to a manifest path. Returns (results, invalid cells, table text).");
  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "bwesid");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = RunCli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");
}
