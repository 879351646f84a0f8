#include "bwesid/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "bwesid/error.hpp"
#include "bwesid/spectrum.hpp"

namespace bwesid {
namespace {

constexpr double kPi = std::numbers::pi;
// Mel energies below this fraction of the frame's strongest band are floored.
constexpr double kRelativeLogFloor = 1e-10;

std::vector<double> LogWithRelativeFloor(std::vector<double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  if (!(peak > 0.0)) return std::vector<double>(values.size(), 0.0);
  const double floor = peak * kRelativeLogFloor;
  for (double& v : values) v = std::log(std::max(v, floor));
  return values;
}

}  // namespace

std::vector<double> Autocorrelation(std::span<const double> frame, int max_lag) {
  Require(max_lag >= 0, "autocorrelation lag must be non-negative");
  std::vector<double> r(static_cast<std::size_t>(max_lag) + 1, 0.0);
  const std::size_t n = frame.size();
  for (std::size_t lag = 0; lag < r.size() && lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += frame[i] * frame[i + lag];
    r[lag] = acc;
  }
  return r;
}

LpcModel LevinsonDurbin(std::span<const double> r, int order) {
  Require(order >= 0, "LPC order must be non-negative");
  Require(r.size() > static_cast<std::size_t>(order), "need order + 1 autocorrelation lags");
  LpcModel model;
  model.coefficients.assign(static_cast<std::size_t>(order), 0.0);
  model.reflection.assign(static_cast<std::size_t>(order), 0.0);
  model.gain = r[0];
  if (!(r[0] > 0.0)) {
    model.gain = 0.0;
    model.degenerate = true;
    return model;
  }

  std::vector<double>& a = model.coefficients;
  std::vector<double> previous(a.size());
  double error = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[static_cast<std::size_t>(i)];
    for (int j = 1; j < i; ++j) acc -= a[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(i - j)];
    const double k = acc / error;
    // Round-off on near-singular spectra can push |k| to 1; keep the stable
    // lower-order solution in that case.
    if (!(std::abs(k) < 1.0)) break;
    previous = a;
    a[static_cast<std::size_t>(i - 1)] = k;
    for (int j = 1; j < i; ++j) {
      a[static_cast<std::size_t>(j - 1)] = previous[static_cast<std::size_t>(j - 1)] -
                                           k * previous[static_cast<std::size_t>(i - j - 1)];
    }
    model.reflection[static_cast<std::size_t>(i - 1)] = k;
    error *= 1.0 - k * k;
  }
  model.gain = error;
  return model;
}

LpcModel AutocorrLpc(std::span<const double> frame, int order) {
  Require(order >= 0, "LPC order must be non-negative");
  Require(frame.size() > static_cast<std::size_t>(order), "frame must be longer than the LPC order");
  return LevinsonDurbin(Autocorrelation(frame, order), order);
}

std::vector<double> LpcToCepstrum(std::span<const double> a, int n_ceps) {
  Require(n_ceps >= 0, "cepstrum length must be non-negative");
  const int p = static_cast<int>(a.size());
  std::vector<double> c(static_cast<std::size_t>(n_ceps) + 1, 0.0);  // c[0] unused
  for (int n = 1; n <= n_ceps; ++n) {
    double acc = n <= p ? a[static_cast<std::size_t>(n - 1)] : 0.0;
    for (int k = std::max(1, n - p); k < n; ++k) {
      acc += (static_cast<double>(k) / n) * c[static_cast<std::size_t>(k)] *
             a[static_cast<std::size_t>(n - k - 1)];
    }
    c[static_cast<std::size_t>(n)] = acc;
  }
  c.erase(c.begin());
  return c;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int DefaultMelFilterCount(int sample_rate_hz) {
  return static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(sample_rate_hz))));
}

MelFilterbank::MelFilterbank(int sample_rate_hz, std::size_t fft_len, int n_filters,
                             double lo_hz, double hi_hz)
    : fft_len_(fft_len) {
  Require(n_filters >= 1, "need at least one mel filter");
  Require(fft_len >= 2, "FFT length too small");
  const double nyquist = 0.5 * sample_rate_hz;
  Require(lo_hz >= 0.0 && hi_hz > lo_hz && hi_hz <= nyquist, "invalid filterbank range");

  const double mel_lo = HzToMel(lo_hz);
  const double mel_hi = HzToMel(hi_hz);
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_filters + 1));
  }
  const std::size_t n_bins = fft_len / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(fft_len);

  for (int m = 0; m < n_filters; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double centre = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    Filter filter;
    std::vector<double> dense(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      const double rise = (f - left) / (centre - left);
      const double fall = (right - f) / (right - centre);
      dense[k] = std::max(0.0, std::min(rise, fall));
    }
    auto first = std::find_if(dense.begin(), dense.end(), [](double w) { return w > 0.0; });
    if (first == dense.end()) {
      // Filter narrower than a bin: take the bin nearest its centre.
      const auto nearest = std::min<std::size_t>(
          static_cast<std::size_t>(std::lround(centre / bin_hz)), n_bins - 1);
      filter.first_bin = nearest;
      filter.weights = {1.0};
    } else {
      auto last = std::find_if(dense.rbegin(), dense.rend(), [](double w) { return w > 0.0; }).base();
      filter.first_bin = static_cast<std::size_t>(first - dense.begin());
      filter.weights.assign(first, last);
    }
    for (double w : filter.weights) filter.weight_sum += w;
    filters_.push_back(std::move(filter));
  }
}

std::vector<double> MelFilterbank::Apply(std::span<const double> power) const {
  Require(power.size() == fft_len_ / 2 + 1, "power spectrum size does not match filterbank");
  std::vector<double> energies(filters_.size());
  for (std::size_t m = 0; m < filters_.size(); ++m) {
    const Filter& f = filters_[m];
    double acc = 0.0;
    for (std::size_t i = 0; i < f.weights.size(); ++i) acc += f.weights[i] * power[f.first_bin + i];
    energies[m] = acc / f.weight_sum;
  }
  return energies;
}

namespace {

MelConfig ResolveMelConfig(MelConfig config) {
  if (config.n_filters <= 0) config.n_filters = DefaultMelFilterCount(config.sample_rate_hz);
  if (config.hi_hz < 0.0) config.hi_hz = 0.5 * config.sample_rate_hz;
  return config;
}

}  // namespace

MelCepstrum::MelCepstrum(const MelConfig& config)
    : config_(ResolveMelConfig(config)),
      bank_(config_.sample_rate_hz, config_.fft_len, config_.n_filters, config_.lo_hz,
            config_.hi_hz) {
  Require(config_.n_ceps >= 1, "need at least one cepstral coefficient");
  Require(config_.n_ceps < config_.n_filters,
          "mel-cepstrum dimension " + std::to_string(config_.n_ceps) + " needs more than " +
              std::to_string(config_.n_filters) + " filters");
}

std::vector<double> MelCepstrum::Compute(std::span<const double> frame) const {
  if (frame.size() > config_.fft_len) {
    Fail(ErrorKind::kInvalidArgument, "FFT length " + std::to_string(config_.fft_len) +
                                          " is smaller than the frame");
  }
  const auto log_energy = LogWithRelativeFloor(bank_.Apply(PowerSpectrum(frame, config_.fft_len)));
  const auto m_count = static_cast<double>(log_energy.size());
  const double scale = std::sqrt(2.0 / m_count);
  std::vector<double> c(static_cast<std::size_t>(config_.n_ceps));
  for (int k = 1; k <= config_.n_ceps; ++k) {
    double acc = 0.0;
    for (std::size_t m = 0; m < log_energy.size(); ++m) {
      acc += log_energy[m] * std::cos(kPi * k * (static_cast<double>(m) + 0.5) / m_count);
    }
    c[static_cast<std::size_t>(k - 1)] = scale * acc;
  }
  return c;
}

std::vector<double> Melcepst(std::span<const double> frame, int sample_rate_hz, int n_ceps,
                             int n_filters, std::size_t fft_len) {
  MelConfig config;
  config.sample_rate_hz = sample_rate_hz;
  config.fft_len = fft_len;
  config.n_ceps = n_ceps;
  config.n_filters = n_filters;
  return MelCepstrum(config).Compute(frame);
}

double VoicingDegree(std::span<const double> frame, int sample_rate_hz) {
  Require(sample_rate_hz > 0, "sample rate must be positive");
  const std::size_t n = frame.size();
  const auto min_lag = static_cast<std::size_t>(std::lround(0.0025 * sample_rate_hz));
  const auto max_lag = static_cast<std::size_t>(std::lround(0.016 * sample_rate_hz));
  Require(n >= max_lag, "voicing needs a frame of at least 16 ms");

  // Prefix sums of x^2 give the energy of both overlapping segments per lag.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + frame[i] * frame[i];
  if (!(prefix[n] > 0.0)) return 0.0;

  double best = 0.0;
  for (std::size_t lag = min_lag; lag <= max_lag && lag < n; ++lag) {
    double cross = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) cross += frame[i] * frame[i + lag];
    const double e_head = prefix[n - lag];
    const double e_tail = prefix[n] - prefix[lag];
    const double denom = std::sqrt(e_head * e_tail);
    if (denom > 0.0) best = std::max(best, cross / denom);
  }
  return std::clamp(best, 0.0, 1.0);
}

double EnergyRatioDb(double high_energy, double narrow_energy) {
  if (!(high_energy > 0.0)) return kEnergyRatioFloorDb;
  if (!(narrow_energy > 0.0)) return kEnergyRatioCeilDb;
  return std::clamp(10.0 * std::log10(high_energy / narrow_energy), kEnergyRatioFloorDb,
                    kEnergyRatioCeilDb);
}

double BandEnergyRatioDb(std::span<const double> frame, int sample_rate_hz) {
  Require(sample_rate_hz == 16000, "band energy ratio expects a 16 kHz frame");
  const auto power = PowerSpectrum(frame, NextPowerOfTwo(std::max<std::size_t>(frame.size(), 2)));
  return EnergyRatioDb(BandEnergy(power, sample_rate_hz, kNarrowHiHz, kHighHiHz),
                       BandEnergy(power, sample_rate_hz, kNarrowLoHz, kNarrowHiHz));
}

BinRange HighBandBins(std::size_t n_power_bins, int sample_rate_hz) {
  Require(n_power_bins >= 2, "power spectrum too short");
  const double bin_hz = 0.5 * sample_rate_hz / static_cast<double>(n_power_bins - 1);
  const auto first = static_cast<std::size_t>(std::ceil(kNarrowHiHz / bin_hz - 1e-9));
  Require(first < n_power_bins, "sample rate too low for the high band");
  return {first, n_power_bins - first};
}

std::vector<double> HighBandEnvelopeCepstrum(std::span<const double> power, int sample_rate_hz,
                                             int n_ceps) {
  const BinRange bins = HighBandBins(power.size(), sample_rate_hz);
  std::vector<double> band(power.begin() + static_cast<std::ptrdiff_t>(bins.first), power.end());
  auto log_power = LogWithRelativeFloor(std::move(band));
  const auto b_count = static_cast<double>(bins.count);
  std::vector<double> c(static_cast<std::size_t>(n_ceps), 0.0);
  for (int k = 1; k <= n_ceps; ++k) {
    double acc = 0.0;
    for (std::size_t b = 0; b < bins.count; ++b) {
      acc += 0.5 * log_power[b] * std::cos(kPi * k * (static_cast<double>(b) + 0.5) / b_count);
    }
    c[static_cast<std::size_t>(k - 1)] = 2.0 * acc / b_count;
  }
  return c;
}

std::vector<double> HighBandLogEnvelope(std::span<const double> cepstrum, std::size_t n_bins) {
  std::vector<double> env(n_bins, 0.0);
  const auto b_count = static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < cepstrum.size(); ++k) {
      acc += cepstrum[k] * std::cos(kPi * static_cast<double>(k + 1) * (static_cast<double>(b) + 0.5) / b_count);
    }
    env[b] = acc;
  }
  return env;
}

std::string ToString(Parameterization p) {
  return p == Parameterization::kLpcc ? "LPCC" : "MELCEPST";
}

Parameterization ParseParameterization(const std::string& text) {
  std::string lower;
  for (char ch : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (lower == "lpcc") return Parameterization::kLpcc;
  if (lower == "melcepst" || lower == "mfcc") return Parameterization::kMelcepst;
  Fail(ErrorKind::kInvalidArgument, "unknown parameterization '" + text + "'");
}

std::size_t ResolvedFftLength(const FeatureConfig& config, int sample_rate_hz) {
  if (config.fft_len > 0) return config.fft_len;
  const FrameGeometry g = ResolveFrameGeometry(sample_rate_hz, config.frame_ms, config.overlap);
  return NextPowerOfTwo(g.frame_len);
}

FeatureMatrix ExtractFeatures(const AudioBuffer& buffer, const FeatureConfig& config) {
  ValidateBuffer(buffer);
  Require(config.dimension >= 1, "feature dimension P must be positive");
  const AudioBuffer emphasized = Preemphasize(buffer, config.preemphasis);
  const FrameSequence frames =
      FrameSignal(emphasized, config.frame_ms, config.overlap, WindowKind::kHamming);

  FeatureMatrix out;
  out.parameterization = config.parameterization;
  out.vectors.resize(static_cast<Eigen::Index>(frames.frame_count()), config.dimension);
  const auto p = static_cast<std::size_t>(config.dimension);

  if (config.parameterization == Parameterization::kLpcc) {
    Require(frames.frame_len() > p, "frame too short for LPC order " + std::to_string(p));
    for (Eigen::Index t = 0; t < frames.frames.rows(); ++t) {
      std::span<const double> frame(frames.frames.row(t).data(), frames.frame_len());
      const auto c = LpcToCepstrum(AutocorrLpc(frame, config.dimension), config.dimension);
      std::copy(c.begin(), c.end(), out.vectors.row(t).data());
    }
    return out;
  }

  MelConfig mel;
  mel.sample_rate_hz = buffer.sample_rate_hz;
  mel.fft_len = ResolvedFftLength(config, buffer.sample_rate_hz);
  mel.n_ceps = config.dimension;
  mel.n_filters = config.n_filters;
  const MelCepstrum analyzer(mel);
  for (Eigen::Index t = 0; t < frames.frames.rows(); ++t) {
    std::span<const double> frame(frames.frames.row(t).data(), frames.frame_len());
    const auto c = analyzer.Compute(frame);
    std::copy(c.begin(), c.end(), out.vectors.row(t).data());
  }
  return out;
}

void WriteFeatureCsv(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  const std::string prefix = ToString(features.parameterization);
  out << "frame";
  for (int k = 1; k <= features.dimension(); ++k) out << ',' << prefix << '_' << k;
  out << '\n';
  out.precision(17);
  for (Eigen::Index t = 0; t < features.vectors.rows(); ++t) {
    out << t;
    for (Eigen::Index k = 0; k < features.vectors.cols(); ++k) out << ',' << features.vectors(t, k);
    out << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace bwesid
