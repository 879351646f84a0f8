#include "bwesid/bwe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "bwesid/error.hpp"
#include "bwesid/serialize.hpp"
#include "bwesid/spectrum.hpp"

namespace bwesid {
namespace {

constexpr int kFlatteningOrder = 4;

double Energy(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

// Samples [start, start + length) of a signal, zero outside its support.
std::vector<double> Slice(const std::vector<double>& x, std::ptrdiff_t start, std::size_t length) {
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const std::ptrdiff_t j = start + static_cast<std::ptrdiff_t>(i);
    if (j >= 0 && j < static_cast<std::ptrdiff_t>(x.size())) out[i] = x[static_cast<std::size_t>(j)];
  }
  return out;
}

FrameGeometry NarrowGeometry(const BweFeatureConfig& c) {
  return ResolveFrameGeometry(8000, c.frame_ms, c.overlap);
}

FrameGeometry WideGeometry(const BweFeatureConfig& c) {
  return ResolveFrameGeometry(16000, c.frame_ms, c.overlap);
}

void CheckFeatureConfig(const BweFeatureConfig& c) {
  Require(c.narrow_cepstra >= 1 && c.high_cepstra >= 1, "BWE feature counts must be positive");
  const FrameGeometry nb = NarrowGeometry(c);
  const FrameGeometry wb = WideGeometry(c);
  Require(wb.frame_len == 2 * nb.frame_len && wb.hop == 2 * nb.hop,
          "narrowband and wideband frames must cover the same time span");
  Require(c.narrow_fft_len >= nb.frame_len, "narrowband FFT shorter than the frame");
  Require(c.wide_fft_len >= wb.frame_len && c.wide_fft_len >= c.synthesis_len,
          "wideband FFT shorter than the frame");
  Require(c.synthesis_len >= 2 && c.synthesis_len % 2 == 0, "synthesis length must be even");
  Require(nb.frame_len >= static_cast<std::size_t>(0.016 * 8000), "narrowband frame below 16 ms");
}

void WriteFeatureBlock(ByteWriter& w, const BweFeatureConfig& c) {
  w.U32(static_cast<std::uint32_t>(c.narrow_cepstra));
  w.U32(static_cast<std::uint32_t>(c.high_cepstra));
  w.F64(c.frame_ms);
  w.U32(static_cast<std::uint32_t>(c.overlap.numerator));
  w.U32(static_cast<std::uint32_t>(c.overlap.denominator));
  w.U32(c.narrow_fft_len);
  w.U32(c.wide_fft_len);
  w.U32(static_cast<std::uint32_t>(c.narrow_filters));
  w.F64(c.narrow_mel_lo_hz);
  w.F64(c.narrow_mel_hi_hz);
  w.U32(c.synthesis_len);
}

BweFeatureConfig ReadFeatureBlock(ByteReader& r) {
  BweFeatureConfig c;
  c.narrow_cepstra = static_cast<int>(r.U32());
  c.high_cepstra = static_cast<int>(r.U32());
  c.frame_ms = r.F64();
  c.overlap.numerator = static_cast<int>(r.U32());
  c.overlap.denominator = static_cast<int>(r.U32());
  c.narrow_fft_len = r.U32();
  c.wide_fft_len = r.U32();
  c.narrow_filters = static_cast<int>(r.U32());
  c.narrow_mel_lo_hz = r.F64();
  c.narrow_mel_hi_hz = r.F64();
  c.synthesis_len = r.U32();
  return c;
}

}  // namespace

BlockSplit BweModel::EnergySplit() const {
  BlockSplit s;
  for (int i = 0; i < features.narrow_dim(); ++i) s.x_dims.push_back(i);
  s.y_dims = {features.energy_index()};
  return s;
}

BlockSplit BweModel::EnvelopeSplit() const {
  BlockSplit s;
  for (int i = 0; i < features.narrow_dim(); ++i) s.x_dims.push_back(i);
  s.x_dims.push_back(features.energy_index());
  for (int i = features.narrow_dim(); i < features.energy_index(); ++i) s.y_dims.push_back(i);
  return s;
}

void BweModel::Validate() const {
  CheckFeatureConfig(features);
  joint.Validate();
  if (joint.dimension() != features.joint_dim()) {
    Fail(ErrorKind::kInvalidArgument, "BWE mixture dimension " + std::to_string(joint.dimension()) +
                                          " does not match feature layout " +
                                          std::to_string(features.joint_dim()));
  }
}

MelCepstrum MakeNarrowbandAnalyzer(const BweFeatureConfig& config) {
  MelConfig mel;
  mel.sample_rate_hz = 8000;
  mel.fft_len = config.narrow_fft_len;
  mel.n_ceps = config.narrow_cepstra;
  mel.n_filters = config.narrow_filters;
  mel.lo_hz = config.narrow_mel_lo_hz;
  mel.hi_hz = config.narrow_mel_hi_hz;
  return MelCepstrum(mel);
}

std::vector<double> NarrowbandFeature(std::span<const double> frame, const MelCepstrum& analyzer) {
  const auto window = MakeWindow(WindowKind::kHamming, frame.size());
  std::vector<double> windowed(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) windowed[i] = frame[i] * window[i];
  std::vector<double> out = analyzer.Compute(windowed);
  out.push_back(VoicingDegree(frame, 8000));
  return out;
}

JointFrames JointTrainingVectors(const AudioBuffer& wideband, const BweFeatureConfig& config) {
  Require(wideband.sample_rate_hz == 16000, "BWE training expects 16 kHz audio");
  ValidateBuffer(wideband);
  CheckFeatureConfig(config);
  const AudioBuffer narrow = Downsample2x(PotsbandFilter(wideband));
  const FrameGeometry nb = NarrowGeometry(config);
  const FrameGeometry wb = WideGeometry(config);
  const std::size_t count = std::min(FrameCount(narrow.size(), nb), FrameCount(wideband.size(), wb));

  const MelCepstrum analyzer = MakeNarrowbandAnalyzer(config);
  const auto wide_window = MakeWindow(WindowKind::kHamming, wb.frame_len);
  JointFrames out;
  out.vectors.resize(static_cast<Eigen::Index>(count), config.joint_dim());
  out.narrow_energy.resize(count);
  std::vector<double> wide_frame(wb.frame_len);
  for (std::size_t t = 0; t < count; ++t) {
    std::span<const double> nb_frame(narrow.samples.data() + t * nb.hop, nb.frame_len);
    const auto x = NarrowbandFeature(nb_frame, analyzer);
    out.narrow_energy[t] = Energy(nb_frame);

    for (std::size_t i = 0; i < wb.frame_len; ++i) {
      wide_frame[i] = wideband.samples[t * wb.hop + i] * wide_window[i];
    }
    const auto power = PowerSpectrum(wide_frame, config.wide_fft_len);
    const auto envelope = HighBandEnvelopeCepstrum(power, 16000, config.high_cepstra);
    const double ratio = EnergyRatioDb(BandEnergy(power, 16000, kNarrowHiHz, kHighHiHz),
                                       BandEnergy(power, 16000, kNarrowLoHz, kNarrowHiHz));

    auto row = out.vectors.row(static_cast<Eigen::Index>(t));
    Eigen::Index k = 0;
    for (double v : x) row(k++) = v;
    for (double v : envelope) row(k++) = v;
    row(k) = ratio;
  }
  return out;
}

BweModel BweTrain(const std::vector<AudioBuffer>& wideband, const BweTrainConfig& config) {
  CheckFeatureConfig(config.features);
  double seconds = 0.0;
  for (const AudioBuffer& b : wideband) {
    Require(b.sample_rate_hz == 16000, "BWE training expects 16 kHz audio");
    seconds += b.duration_seconds();
  }
  if (seconds < config.min_training_seconds) {
    Fail(ErrorKind::kInsufficientData, "BWE training needs at least " +
                                           std::to_string(config.min_training_seconds) +
                                           " s of speech, got " + std::to_string(seconds) + " s");
  }

  std::vector<JointFrames> parts;
  double peak = 0.0;
  for (const AudioBuffer& b : wideband) {
    parts.push_back(JointTrainingVectors(b, config.features));
    for (double e : parts.back().narrow_energy) peak = std::max(peak, e);
  }
  if (!(peak > 0.0)) Fail(ErrorKind::kInsufficientData, "BWE training corpus is silent");

  const double threshold = peak * std::pow(10.0, config.silence_floor_db / 10.0);
  std::size_t kept = 0;
  for (const JointFrames& p : parts) {
    kept += static_cast<std::size_t>(std::count_if(p.narrow_energy.begin(), p.narrow_energy.end(),
                                                   [&](double e) { return e > threshold; }));
  }
  RowMatrix data(static_cast<Eigen::Index>(kept), config.features.joint_dim());
  Eigen::Index row = 0;
  for (const JointFrames& p : parts) {
    for (std::size_t t = 0; t < p.narrow_energy.size(); ++t) {
      if (p.narrow_energy[t] > threshold) data.row(row++) = p.vectors.row(static_cast<Eigen::Index>(t));
    }
  }

  BweModel model;
  model.features = config.features;
  model.joint = EmFit(data, config.em).model;
  model.Validate();
  return model;
}

ExtendResult BweExtendDetailed(const AudioBuffer& narrowband, const BweModel& model,
                               const ExtendOptions& options) {
  if (narrowband.sample_rate_hz != 8000) {
    Fail(ErrorKind::kInvalidArgument, "bandwidth extension expects 8000 Hz input, got " +
                                          std::to_string(narrowband.sample_rate_hz) + " Hz");
  }
  ValidateBuffer(narrowband);
  model.Validate();
  Require(options.over_penalty > 0 && options.under_penalty > 0, "cost penalties must be positive");

  const BweFeatureConfig& cfg = model.features;
  const ConditionalMixture energy_given_nb(model.joint, model.EnergySplit());
  const ConditionalMixture envelope_given_nb(model.joint, model.EnvelopeSplit());
  const MelCepstrum analyzer = MakeNarrowbandAnalyzer(cfg);

  const AudioBuffer base = Upsample2x(narrowband);
  const AudioBuffer folded = ZeroInsert2x(narrowband);
  const std::size_t out_len = base.size();
  const std::size_t syn_len = cfg.synthesis_len;
  const std::size_t hop = syn_len / 2;
  const std::size_t fft_len = cfg.wide_fft_len;
  const std::size_t nb_len = NarrowGeometry(cfg).frame_len;
  const auto window = MakeWindow(WindowKind::kSqrtHann, syn_len);
  const BinRange band = HighBandBins(fft_len / 2 + 1, 16000);

  ExtendResult result;
  result.audio = base;
  std::vector<double> high(out_len, 0.0);
  if (out_len == 0) return result;

  const auto last = static_cast<std::ptrdiff_t>((out_len - 1) / hop);
  for (std::ptrdiff_t t = -1; t <= last; ++t) {
    const std::ptrdiff_t start = t * static_cast<std::ptrdiff_t>(hop);
    FrameReport report;
    report.start = static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0));

    // Narrowband analysis frame centred on this synthesis frame.
    const std::ptrdiff_t centre8 = (start + static_cast<std::ptrdiff_t>(syn_len / 2)) / 2;
    const auto nb_frame = Slice(narrowband.samples, centre8 - static_cast<std::ptrdiff_t>(nb_len / 2), nb_len);
    std::vector<double> base_frame = Slice(base.samples, start, syn_len);
    std::vector<double> excitation = Slice(folded.samples, start, syn_len);
    for (std::size_t i = 0; i < syn_len; ++i) {
      base_frame[i] *= window[i];
      excitation[i] *= window[i];
    }
    const double narrow_energy =
        BandEnergy(PowerSpectrum(base_frame, fft_len), 16000, kNarrowLoHz, kNarrowHiHz);
    if (!(Energy(nb_frame) > 0.0) || !(narrow_energy > 0.0) || !(Energy(excitation) > 0.0)) {
      result.frames.push_back(report);
      continue;
    }

    const auto x = NarrowbandFeature(nb_frame, analyzer);
    const double ratio = std::clamp(
        energy_given_nb.AsymmetricEstimate(x, options.over_penalty, options.under_penalty),
        kEnergyRatioFloorDb, kEnergyRatioCeilDb);
    std::vector<double> x_with_ratio = x;
    x_with_ratio.push_back(ratio);
    const Vector envelope_cepstra = envelope_given_nb.Mmse(x_with_ratio);
    const auto log_envelope = HighBandLogEnvelope(
        std::span<const double>(envelope_cepstra.data(), static_cast<std::size_t>(envelope_cepstra.size())),
        band.count);

    // Folded excitation: whiten with its own low-order LPC envelope, keep the
    // high band, impose the estimated envelope.
    const LpcModel flattening = AutocorrLpc(excitation, kFlatteningOrder);
    auto spectrum = RealFft(excitation, fft_len);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      if (k < band.first) {
        spectrum[k] = 0.0;
        continue;
      }
      const double omega = 2.0 * 3.141592653589793 * static_cast<double>(k) / static_cast<double>(fft_len);
      std::complex<double> inverse = 1.0;
      for (int j = 0; j < flattening.order(); ++j) {
        inverse -= flattening.coefficients[static_cast<std::size_t>(j)] *
                   std::polar(1.0, -omega * (j + 1));
      }
      spectrum[k] *= inverse * std::exp(log_envelope[k - band.first]);
    }
    std::vector<double> shaped = InverseRealFft(spectrum, fft_len);
    shaped.resize(syn_len);
    for (std::size_t i = 0; i < syn_len; ++i) shaped[i] *= window[i];

    const double high_energy =
        BandEnergy(PowerSpectrum(shaped, fft_len), 16000, kNarrowHiHz, kHighHiHz);
    if (!(high_energy > 0.0)) {
      result.frames.push_back(report);
      continue;
    }
    const double gain = std::sqrt(narrow_energy * std::pow(10.0, ratio / 10.0) / high_energy);
    for (double& v : shaped) v *= gain;

    report.active = true;
    report.estimated_ratio_db = ratio;
    report.achieved_ratio_db = EnergyRatioDb(
        BandEnergy(PowerSpectrum(shaped, fft_len), 16000, kNarrowHiHz, kHighHiHz), narrow_energy);
    result.frames.push_back(report);

    for (std::size_t i = 0; i < syn_len; ++i) {
      const std::ptrdiff_t j = start + static_cast<std::ptrdiff_t>(i);
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(out_len)) high[static_cast<std::size_t>(j)] += shaped[i];
    }
  }
  for (std::size_t n = 0; n < out_len; ++n) result.audio.samples[n] += high[n];
  return result;
}

AudioBuffer BweExtend(const AudioBuffer& narrowband, const BweModel& model,
                      const ExtendOptions& options) {
  return BweExtendDetailed(narrowband, model, options).audio;
}

std::string ToString(Variant v) {
  switch (v) {
    case Variant::kOrig: return "orig";
    case Variant::kNb: return "nb";
    case Variant::kBwe: return "bwe";
    case Variant::kIsdn: return "isdn";
    case Variant::kIsdnBwe: return "isdn_bwe";
  }
  return "?";
}

Variant ParseVariant(const std::string& text) {
  for (Variant v : {Variant::kOrig, Variant::kNb, Variant::kBwe, Variant::kIsdn, Variant::kIsdnBwe}) {
    if (ToString(v) == text) return v;
  }
  Fail(ErrorKind::kInvalidArgument, "unknown variant '" + text + "'");
}

bool VariantNeedsModel(Variant v) { return v == Variant::kBwe || v == Variant::kIsdnBwe; }

int VariantInputRate(Variant v) {
  return v == Variant::kIsdn || v == Variant::kIsdnBwe ? 8000 : 16000;
}

AudioBuffer MakeVariant(const AudioBuffer& buffer, Variant variant, const BweModel* model,
                        const ExtendOptions& options) {
  ValidateBuffer(buffer);
  if (variant == Variant::kOrig) return buffer;
  if (buffer.sample_rate_hz != VariantInputRate(variant)) {
    Fail(ErrorKind::kInvalidArgument, "variant '" + ToString(variant) + "' expects " +
                                          std::to_string(VariantInputRate(variant)) +
                                          " Hz input, got " + std::to_string(buffer.sample_rate_hz));
  }
  if (VariantNeedsModel(variant) && model == nullptr) {
    Fail(ErrorKind::kInvalidArgument, "variant '" + ToString(variant) + "' needs a BWE model");
  }
  switch (variant) {
    case Variant::kNb: return PotsbandFilter(buffer);
    case Variant::kBwe: return BweExtend(Downsample2x(PotsbandFilter(buffer)), *model, options);
    case Variant::kIsdn: return AlawRoundTrip(buffer);
    case Variant::kIsdnBwe: return BweExtend(PotsbandFilter(AlawRoundTrip(buffer)), *model, options);
    case Variant::kOrig: break;
  }
  return buffer;
}

std::vector<std::uint8_t> EncodeBweModel(const BweModel& model) {
  model.Validate();
  ByteWriter w;
  w.Magic("BWEM");
  w.U32(model.format_version);
  WriteFeatureBlock(w, model.features);
  const auto gmm = EncodeGmm(model.joint);
  w.U64(gmm.size());
  w.Raw(gmm);
  w.Checksum();
  return w.bytes();
}

BweModel DecodeBweModel(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.ExpectMagic("BWEM");
  BweModel model;
  model.format_version = r.U32();
  if (model.format_version != BweModel::kFormatVersion) {
    Fail(ErrorKind::kUnsupportedFormat, "unsupported BWEM version " + std::to_string(model.format_version));
  }
  model.features = ReadFeatureBlock(r);
  const std::uint64_t gmm_size = r.U64();
  auto gmm = r.Raw(static_cast<std::size_t>(gmm_size));
  r.VerifyChecksum();
  if (!r.at_end()) Fail(ErrorKind::kMalformedData, "trailing bytes after BWEM checksum");
  model.joint = DecodeGmm(std::move(gmm));
  model.Validate();
  return model;
}

void SaveBweModel(const BweModel& model, const std::filesystem::path& path) {
  const auto bytes = EncodeBweModel(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

BweModel LoadBweModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return DecodeBweModel({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace bwesid
