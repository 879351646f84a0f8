#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bwesid/audio_io.hpp"
#include "bwesid/dsp.hpp"
#include "bwesid/types.hpp"

namespace bwesid {

// All-pole model with A(z) = 1 - sum_k a_k z^-k.
struct LpcModel {
  std::vector<double> coefficients;  // a_1 .. a_p
  std::vector<double> reflection;    // k_1 .. k_p
  double gain = 0.0;                 // residual (prediction error) energy
  bool degenerate = false;           // zero-energy frame

  int order() const { return static_cast<int>(coefficients.size()); }
};

// r[0 .. max_lag] of the frame as given (no further windowing).
std::vector<double> Autocorrelation(std::span<const double> frame, int max_lag);

// Levinson-Durbin on r[0 .. order]. A zero r[0] yields the all-zero model.
LpcModel LevinsonDurbin(std::span<const double> autocorrelation, int order);

LpcModel AutocorrLpc(std::span<const double> frame, int order);

// Cepstrum c_1 .. c_n of 1 / A(z) by the standard LPC-to-cepstrum recursion.
std::vector<double> LpcToCepstrum(std::span<const double> coefficients, int n_ceps);
inline std::vector<double> LpcToCepstrum(const LpcModel& model, int n_ceps) {
  return LpcToCepstrum(model.coefficients, n_ceps);
}

double HzToMel(double hz);
double MelToHz(double mel);

// floor(3 ln fs): 26 filters at 8 kHz, 29 at 16 kHz.
int DefaultMelFilterCount(int sample_rate_hz);

// Triangular unity-peak filters, equally spaced on the mel scale between
// lo_hz and hi_hz. Each output is the weighted mean of the power spectrum
// under its filter, so a flat spectrum gives equal energies in every band.
class MelFilterbank {
 public:
  MelFilterbank(int sample_rate_hz, std::size_t fft_len, int n_filters, double lo_hz,
                double hi_hz);

  std::vector<double> Apply(std::span<const double> power) const;
  int size() const { return static_cast<int>(filters_.size()); }
  std::size_t fft_len() const { return fft_len_; }

 private:
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
    double weight_sum = 0.0;
  };
  std::size_t fft_len_;
  std::vector<Filter> filters_;
};

struct MelConfig {
  int sample_rate_hz = 16000;
  std::size_t fft_len = 512;
  int n_ceps = 12;
  int n_filters = 0;    // 0 selects DefaultMelFilterCount
  double lo_hz = 0.0;
  double hi_hz = -1.0;  // negative selects fs / 2
};

// Mel-cepstrum analyzer: power spectrum -> mel energies -> log -> DCT-II.
// Returns c_1 .. c_P; c_0 is dropped.
class MelCepstrum {
 public:
  explicit MelCepstrum(const MelConfig& config);

  std::vector<double> Compute(std::span<const double> frame) const;
  const MelFilterbank& filterbank() const { return bank_; }
  const MelConfig& config() const { return config_; }

 private:
  MelConfig config_;
  MelFilterbank bank_;
};

// One-shot convenience wrapper around MelCepstrum.
std::vector<double> Melcepst(std::span<const double> frame, int sample_rate_hz, int n_ceps,
                             int n_filters, std::size_t fft_len);

// Peak normalized autocorrelation over lags of 2.5 .. 16 ms, clamped to [0, 1].
double VoicingDegree(std::span<const double> frame, int sample_rate_hz);

inline constexpr double kEnergyRatioFloorDb = -80.0;
inline constexpr double kEnergyRatioCeilDb = 40.0;
inline constexpr double kNarrowLoHz = 300.0;
inline constexpr double kNarrowHiHz = 3400.0;
inline constexpr double kHighHiHz = 8000.0;

// 10 log10(E[3400, 8000] / E[300, 3400]) of a 16 kHz frame, clamped.
double BandEnergyRatioDb(std::span<const double> frame, int sample_rate_hz = 16000);
double EnergyRatioDb(double high_energy, double narrow_energy);

// Smooth log-magnitude shape of the [3400, 8000] Hz band of a 16 kHz power
// spectrum: DCT-II coefficients c_1 .. c_n of the per-bin log magnitude
// (c_0, the band level, is left out).
std::vector<double> HighBandEnvelopeCepstrum(std::span<const double> power,
                                             int sample_rate_hz, int n_ceps);
// Per-bin log magnitude of the band described by the cepstrum, for the bins
// HighBandBins() selects.
std::vector<double> HighBandLogEnvelope(std::span<const double> cepstrum, std::size_t n_bins);
struct BinRange {
  std::size_t first = 0;
  std::size_t count = 0;
};
BinRange HighBandBins(std::size_t n_power_bins, int sample_rate_hz);

inline constexpr int kNarrowCepstra = 15;
inline constexpr int kNarrowFeatureDim = kNarrowCepstra + 1;
inline constexpr int kHighEnvelopeCepstra = 8;

struct NbFeature {
  std::vector<double> cepstra;  // kNarrowCepstra values
  double voicing = 0.0;
};

struct HbFeature {
  std::vector<double> envelope_cepstra;
  double energy_ratio_db = kEnergyRatioFloorDb;
};

enum class Parameterization { kLpcc, kMelcepst };
std::string ToString(Parameterization p);
Parameterization ParseParameterization(const std::string& text);

struct FeatureConfig {
  Parameterization parameterization = Parameterization::kMelcepst;
  int dimension = 12;
  double frame_ms = 30.0;
  Overlap overlap{2, 3};
  double preemphasis = 0.95;
  std::size_t fft_len = 0;  // 0: next power of two above the frame length
  int n_filters = 0;        // 0: DefaultMelFilterCount
};

// FFT length the configuration resolves to at the given rate.
std::size_t ResolvedFftLength(const FeatureConfig& config, int sample_rate_hz);

struct FeatureMatrix {
  RowMatrix vectors;  // T x P
  Parameterization parameterization = Parameterization::kMelcepst;

  int dimension() const { return static_cast<int>(vectors.cols()); }
  int frame_count() const { return static_cast<int>(vectors.rows()); }
};

// Pre-emphasis, Hamming framing, then LPCC (LPC order = P) or mel-cepstrum
// for every frame.
FeatureMatrix ExtractFeatures(const AudioBuffer& buffer, const FeatureConfig& config);

void WriteFeatureCsv(const FeatureMatrix& features, const std::filesystem::path& path);

}  // namespace bwesid
