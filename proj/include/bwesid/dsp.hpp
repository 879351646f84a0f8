#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "bwesid/audio_io.hpp"
#include "bwesid/types.hpp"

namespace bwesid {

enum class WindowKind { kRectangular, kHamming, kHann, kSqrtHann };

// Hamming and Hann are the symmetric (L - 1 denominator) forms used for
// analysis. kSqrtHann is the periodic square-root Hann used for 50 %
// overlap-add synthesis: its square sums to one at hop L / 2.
std::vector<double> MakeWindow(WindowKind kind, std::size_t length);

// Fraction of a frame shared by adjacent frames, e.g. {2, 3}.
struct Overlap {
  int numerator = 0;
  int denominator = 1;
  bool operator==(const Overlap&) const = default;
};

struct FrameGeometry {
  std::size_t frame_len = 0;
  std::size_t hop = 0;
};

// Resolves a frame duration and overlap to integer sample counts. Throws when
// either the frame length or the hop is not a whole number of samples.
FrameGeometry ResolveFrameGeometry(int sample_rate_hz, double frame_ms, Overlap overlap);

// floor((n - frame_len) / hop) + 1, or 0 if the signal is shorter than a frame.
std::size_t FrameCount(std::size_t n, const FrameGeometry& geometry);

struct FrameSequence {
  RowMatrix frames;  // frame_count x frame_len, already windowed
  std::size_t hop = 0;
  WindowKind window = WindowKind::kHamming;
  int sample_rate_hz = 0;

  std::size_t frame_count() const { return static_cast<std::size_t>(frames.rows()); }
  std::size_t frame_len() const { return static_cast<std::size_t>(frames.cols()); }
};

FrameSequence FrameSignal(const AudioBuffer& buffer, const FrameGeometry& geometry,
                          WindowKind window = WindowKind::kHamming);
FrameSequence FrameSignal(const AudioBuffer& buffer, double frame_ms, Overlap overlap,
                          WindowKind window = WindowKind::kHamming);

// y[n] = x[n] - alpha * x[n - 1] with x[-1] = 0.
AudioBuffer Preemphasize(const AudioBuffer& buffer, double alpha);

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  std::complex<double> Response(double freq_hz, double sample_rate_hz) const;
};

// Cascade of second-order sections (direct form II transposed).
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  std::vector<double> Apply(std::span<const double> input) const;
  std::complex<double> Response(double freq_hz, double sample_rate_hz) const;
  const std::vector<Biquad>& sections() const { return sections_; }
  SosFilter Then(const SosFilter& next) const;

 private:
  std::vector<Biquad> sections_;
};

SosFilter DesignButterworthHighpass(int order, double cutoff_hz, double sample_rate_hz);
// Equiripple passband peaking at 0 dB; `edge_hz` is the ripple-band edge.
SosFilter DesignChebyshevLowpass(int order, double ripple_db, double edge_hz,
                                 double sample_rate_hz);

// Forward-backward (zero-phase) filtering with odd-symmetric edge extension.
std::vector<double> FiltFilt(const SosFilter& filter, std::span<const double> input,
                             std::size_t pad);

// Telephone band limiter: order-4 Butterworth high-pass and order-6 Chebyshev
// low-pass, tuned so the zero-phase response is -3 dB at 300 Hz and 3400 Hz.
struct PotsbandDesign {
  SosFilter highpass;
  SosFilter lowpass;
  int sample_rate_hz = 0;

  // Power gain of the forward-backward application, in dB.
  double GainDb(double freq_hz) const;
};

const PotsbandDesign& PotsbandFor(int sample_rate_hz);
AudioBuffer PotsbandFilter(const AudioBuffer& buffer);

// Linear-phase low-pass used by the 2x rate converters (designed at 16 kHz).
const std::vector<double>& ResamplingKernel();
AudioBuffer Upsample2x(const AudioBuffer& buffer);
AudioBuffer Downsample2x(const AudioBuffer& buffer);
// y[2n] = x[n], y[2n + 1] = 0, without an anti-imaging filter.
AudioBuffer ZeroInsert2x(const AudioBuffer& buffer);

}  // namespace bwesid
