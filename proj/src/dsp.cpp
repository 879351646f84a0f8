#include "bwesid/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "bwesid/error.hpp"

namespace bwesid {
namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Bilinear transform of (b2 s^2 + b1 s + b0) / (a2 s^2 + a1 s + a0).
Biquad Bilinear(double b2, double b1, double b0, double a2, double a1, double a0,
                double sample_rate_hz) {
  const double k = 2.0 * sample_rate_hz;
  const double k2 = k * k;
  const double n0 = b2 * k2 + b1 * k + b0;
  const double n1 = 2.0 * b0 - 2.0 * b2 * k2;
  const double n2 = b2 * k2 - b1 * k + b0;
  const double d0 = a2 * k2 + a1 * k + a0;
  const double d1 = 2.0 * a0 - 2.0 * a2 * k2;
  const double d2 = a2 * k2 - a1 * k + a0;
  return {n0 / d0, n1 / d0, n2 / d0, d1 / d0, d2 / d0};
}

double Prewarp(double freq_hz, double sample_rate_hz) {
  return 2.0 * sample_rate_hz * std::tan(kPi * freq_hz / sample_rate_hz);
}

double Bisect(double lo, double hi, int iterations, auto&& sign_of) {
  // sign_of(lo) and sign_of(hi) are assumed to differ.
  const bool lo_positive = sign_of(lo) > 0;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((sign_of(mid) > 0) == lo_positive) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PotsbandDesign DesignPotsband(int sample_rate_hz) {
  constexpr double kLowEdge = 300.0;
  constexpr double kHighEdge = 3400.0;
  constexpr double kEdgeGainDb = -3.0;
  constexpr double kRippleDb = 0.2;
  const double fs = sample_rate_hz;

  PotsbandDesign design;
  design.sample_rate_hz = sample_rate_hz;
  double hp_cutoff = kLowEdge;
  double lp_edge = kHighEdge;
  design.highpass = DesignButterworthHighpass(4, hp_cutoff, fs);
  design.lowpass = DesignChebyshevLowpass(6, kRippleDb, lp_edge, fs);
  // Alternate the two one-dimensional edge fits; each section barely moves the
  // other edge, so a few rounds settle to machine precision.
  for (int round = 0; round < 6; ++round) {
    hp_cutoff = Bisect(100.0, 600.0, 80, [&](double fc) {
      PotsbandDesign trial = design;
      trial.highpass = DesignButterworthHighpass(4, fc, fs);
      return trial.GainDb(kLowEdge) - kEdgeGainDb;
    });
    design.highpass = DesignButterworthHighpass(4, hp_cutoff, fs);
    lp_edge = Bisect(2500.0, std::min(3999.0, 0.49 * fs), 80, [&](double fe) {
      PotsbandDesign trial = design;
      trial.lowpass = DesignChebyshevLowpass(6, kRippleDb, fe, fs);
      return trial.GainDb(kHighEdge) - kEdgeGainDb;
    });
    design.lowpass = DesignChebyshevLowpass(6, kRippleDb, lp_edge, fs);
  }
  return design;
}

std::vector<double> MakeResamplingKernel() {
  constexpr double kRate = 16000.0;
  constexpr double kCutoff = 3700.0;
  constexpr int kHalfLength = 64;
  constexpr double kAttenuationDb = 60.0;
  const double beta = 0.1102 * (kAttenuationDb - 8.7);
  const double norm = std::cyl_bessel_i(0.0, beta);
  const double wc = 2.0 * kCutoff / kRate;

  std::vector<double> h(2 * kHalfLength + 1);
  double sum = 0.0;
  for (int n = -kHalfLength; n <= kHalfLength; ++n) {
    const double sinc = n == 0 ? 1.0 : std::sin(kPi * wc * n) / (kPi * wc * n);
    const double r = static_cast<double>(n) / kHalfLength;
    const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / norm;
    h[n + kHalfLength] = wc * sinc * kaiser;
    sum += h[n + kHalfLength];
  }
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace

std::vector<double> MakeWindow(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    switch (kind) {
      case WindowKind::kRectangular: break;
      case WindowKind::kHamming: w[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / denom); break;
      case WindowKind::kHann: w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / denom); break;
      case WindowKind::kSqrtHann:
        w[n] = std::sin(kPi * static_cast<double>(n) / static_cast<double>(length));
        break;
    }
  }
  return w;
}

FrameGeometry ResolveFrameGeometry(int sample_rate_hz, double frame_ms, Overlap overlap) {
  Require(sample_rate_hz > 0, "sample rate must be positive");
  Require(frame_ms > 0, "frame duration must be positive");
  Require(overlap.denominator > 0 && overlap.numerator >= 0 &&
              overlap.numerator < overlap.denominator,
          "overlap must be a fraction in [0, 1)");
  const double len = sample_rate_hz * frame_ms / 1000.0;
  const double rounded = std::round(len);
  if (std::abs(len - rounded) > 1e-6 || rounded < 1) {
    Fail(ErrorKind::kInvalidArgument, "frame of " + std::to_string(frame_ms) + " ms at " +
                                          std::to_string(sample_rate_hz) +
                                          " Hz is not a whole number of samples");
  }
  const auto frame_len = static_cast<std::size_t>(rounded);
  const std::size_t advance = frame_len * static_cast<std::size_t>(overlap.denominator - overlap.numerator);
  if (advance % static_cast<std::size_t>(overlap.denominator) != 0) {
    Fail(ErrorKind::kInvalidArgument,
         "hop for a " + std::to_string(frame_len) + "-sample frame is not a whole number of samples");
  }
  return {frame_len, advance / static_cast<std::size_t>(overlap.denominator)};
}

std::size_t FrameCount(std::size_t n, const FrameGeometry& geometry) {
  if (geometry.frame_len == 0 || geometry.hop == 0 || n < geometry.frame_len) return 0;
  return (n - geometry.frame_len) / geometry.hop + 1;
}

FrameSequence FrameSignal(const AudioBuffer& buffer, const FrameGeometry& geometry,
                          WindowKind window) {
  Require(geometry.frame_len > 0 && geometry.hop > 0, "frame length and hop must be positive");
  if (buffer.size() < geometry.frame_len) {
    Fail(ErrorKind::kInvalidArgument, "buffer of " + std::to_string(buffer.size()) +
                                          " samples is shorter than one frame");
  }
  const std::size_t count = FrameCount(buffer.size(), geometry);
  const auto w = MakeWindow(window, geometry.frame_len);
  FrameSequence out;
  out.frames.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(geometry.frame_len));
  out.hop = geometry.hop;
  out.window = window;
  out.sample_rate_hz = buffer.sample_rate_hz;
  for (std::size_t t = 0; t < count; ++t) {
    const double* src = buffer.samples.data() + t * geometry.hop;
    double* dst = out.frames.row(static_cast<Eigen::Index>(t)).data();
    for (std::size_t n = 0; n < geometry.frame_len; ++n) dst[n] = src[n] * w[n];
  }
  return out;
}

FrameSequence FrameSignal(const AudioBuffer& buffer, double frame_ms, Overlap overlap,
                          WindowKind window) {
  return FrameSignal(buffer, ResolveFrameGeometry(buffer.sample_rate_hz, frame_ms, overlap), window);
}

AudioBuffer Preemphasize(const AudioBuffer& buffer, double alpha) {
  Require(alpha >= 0.0 && alpha < 1.0, "pre-emphasis coefficient must lie in [0, 1)");
  AudioBuffer out{std::vector<double>(buffer.size()), buffer.sample_rate_hz};
  double previous = 0.0;
  for (std::size_t n = 0; n < buffer.size(); ++n) {
    out.samples[n] = buffer.samples[n] - alpha * previous;
    previous = buffer.samples[n];
  }
  return out;
}

std::complex<double> Biquad::Response(double freq_hz, double sample_rate_hz) const {
  const Complex z1 = std::polar(1.0, -2.0 * kPi * freq_hz / sample_rate_hz);
  const Complex z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

std::vector<double> SosFilter::Apply(std::span<const double> input) const {
  std::vector<double> y(input.begin(), input.end());
  for (const Biquad& s : sections_) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::complex<double> SosFilter::Response(double freq_hz, double sample_rate_hz) const {
  Complex h = 1.0;
  for (const Biquad& s : sections_) h *= s.Response(freq_hz, sample_rate_hz);
  return h;
}

SosFilter SosFilter::Then(const SosFilter& next) const {
  std::vector<Biquad> all = sections_;
  all.insert(all.end(), next.sections_.begin(), next.sections_.end());
  return SosFilter(std::move(all));
}

SosFilter DesignButterworthHighpass(int order, double cutoff_hz, double sample_rate_hz) {
  Require(order >= 2 && order % 2 == 0, "high-pass order must be even and >= 2");
  Require(cutoff_hz > 0 && cutoff_hz < 0.5 * sample_rate_hz, "cutoff outside (0, fs/2)");
  const double wc = Prewarp(cutoff_hz, sample_rate_hz);
  std::vector<Biquad> sections;
  for (int k = 1; k <= order / 2; ++k) {
    // Low-pass prototype pole in the upper half plane; s -> wc / s maps it.
    const Complex p = std::polar(1.0, kPi * (2.0 * k + order - 1) / (2.0 * order));
    const Complex q = wc / p;
    sections.push_back(Bilinear(1.0, 0.0, 0.0, 1.0, -2.0 * q.real(), std::norm(q), sample_rate_hz));
  }
  return SosFilter(std::move(sections));
}

SosFilter DesignChebyshevLowpass(int order, double ripple_db, double edge_hz,
                                 double sample_rate_hz) {
  Require(order >= 2 && order % 2 == 0, "low-pass order must be even and >= 2");
  Require(ripple_db > 0, "ripple must be positive");
  Require(edge_hz > 0 && edge_hz < 0.5 * sample_rate_hz, "edge outside (0, fs/2)");
  const double wp = Prewarp(edge_hz, sample_rate_hz);
  const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / eps) / order;
  std::vector<Biquad> sections;
  for (int k = 1; k <= order / 2; ++k) {
    const double theta = kPi * (2.0 * k - 1) / (2.0 * order);
    const Complex p = wp * Complex(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    const double mag2 = std::norm(p);
    sections.push_back(Bilinear(0.0, 0.0, mag2, 1.0, -2.0 * p.real(), mag2, sample_rate_hz));
  }
  // Even orders sit at the bottom of the ripple at DC; lift the peaks to 0 dB.
  const double lift = 1.0 / std::sqrt(1.0 + eps * eps);
  sections.front().b0 *= lift;
  sections.front().b1 *= lift;
  sections.front().b2 *= lift;
  return SosFilter(std::move(sections));
}

std::vector<double> FiltFilt(const SosFilter& filter, std::span<const double> input,
                             std::size_t pad) {
  const std::size_t n = input.size();
  if (n == 0) return {};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * input[0] - input[i]);
  ext.insert(ext.end(), input.begin(), input.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * input[n - 1] - input[n - 1 - i]);

  std::vector<double> y = filter.Apply(ext);
  std::reverse(y.begin(), y.end());
  y = filter.Apply(y);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad),
          y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

double PotsbandDesign::GainDb(double freq_hz) const {
  const double mag = std::abs(highpass.Response(freq_hz, sample_rate_hz)) *
                     std::abs(lowpass.Response(freq_hz, sample_rate_hz));
  return 40.0 * std::log10(std::max(mag, 1e-300));
}

const PotsbandDesign& PotsbandFor(int sample_rate_hz) {
  if (sample_rate_hz != 8000 && sample_rate_hz != 16000) {
    Fail(ErrorKind::kInvalidArgument,
         "potsband supports 8000 and 16000 Hz, got " + std::to_string(sample_rate_hz));
  }
  static std::mutex mutex;
  static std::map<int, PotsbandDesign> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(sample_rate_hz);
  if (it == cache.end()) it = cache.emplace(sample_rate_hz, DesignPotsband(sample_rate_hz)).first;
  return it->second;
}

AudioBuffer PotsbandFilter(const AudioBuffer& buffer) {
  ValidateBuffer(buffer);
  const PotsbandDesign& design = PotsbandFor(buffer.sample_rate_hz);
  const SosFilter cascade = design.highpass.Then(design.lowpass);
  const auto pad = static_cast<std::size_t>(buffer.sample_rate_hz / 20);
  return {FiltFilt(cascade, buffer.samples, pad), buffer.sample_rate_hz};
}

const std::vector<double>& ResamplingKernel() {
  static const std::vector<double> kernel = MakeResamplingKernel();
  return kernel;
}

AudioBuffer Upsample2x(const AudioBuffer& buffer) {
  Require(buffer.sample_rate_hz == 8000, "upsample_2x expects 8000 Hz input");
  ValidateBuffer(buffer);
  const auto& h = ResamplingKernel();
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(buffer.size());
  AudioBuffer out{std::vector<double>(2 * buffer.size(), 0.0), 16000};
  for (std::ptrdiff_t m = 0; m < 2 * n_in; ++m) {
    // y[m] = 2 * sum_k h[k] z[m + half - k], z nonzero only at even indices.
    double acc = 0.0;
    const std::ptrdiff_t base = m + half;
    std::ptrdiff_t k = base & 1;  // first k with (base - k) even
    for (; k < static_cast<std::ptrdiff_t>(h.size()); k += 2) {
      const std::ptrdiff_t j = (base - k) / 2;
      if (j >= 0 && j < n_in) acc += h[static_cast<std::size_t>(k)] * buffer.samples[static_cast<std::size_t>(j)];
    }
    out.samples[static_cast<std::size_t>(m)] = 2.0 * acc;
  }
  return out;
}

AudioBuffer Downsample2x(const AudioBuffer& buffer) {
  Require(buffer.sample_rate_hz == 16000, "downsample_2x expects 16000 Hz input");
  ValidateBuffer(buffer);
  const auto& h = ResamplingKernel();
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(buffer.size());
  AudioBuffer out{std::vector<double>(buffer.size() / 2, 0.0), 8000};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::ptrdiff_t centre = 2 * static_cast<std::ptrdiff_t>(i) + half;
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(h.size()); ++k) {
      const std::ptrdiff_t j = centre - k;
      if (j >= 0 && j < n_in) acc += h[static_cast<std::size_t>(k)] * buffer.samples[static_cast<std::size_t>(j)];
    }
    out.samples[i] = acc;
  }
  return out;
}

AudioBuffer ZeroInsert2x(const AudioBuffer& buffer) {
  Require(buffer.sample_rate_hz == 8000, "zero_insert_2x expects 8000 Hz input");
  AudioBuffer out{std::vector<double>(2 * buffer.size(), 0.0), 16000};
  for (std::size_t n = 0; n < buffer.size(); ++n) out.samples[2 * n] = buffer.samples[n];
  return out;
}

}  // namespace bwesid
