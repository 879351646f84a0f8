#include "bwesid/spectrum.hpp"

#include <algorithm>
#include <unsupported/Eigen/FFT>

#include "bwesid/error.hpp"

namespace bwesid {
namespace {

Eigen::FFT<double>& Engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace

std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::complex<double>> RealFft(std::span<const double> frame, std::size_t fft_len) {
  Require(fft_len >= frame.size(), "FFT length shorter than frame");
  Require(fft_len >= 2, "FFT length must be at least 2");
  std::vector<double> padded(fft_len, 0.0);
  std::copy(frame.begin(), frame.end(), padded.begin());
  auto& fft = Engine();
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  spectrum.resize(fft_len / 2 + 1);
  return spectrum;
}

std::vector<double> InverseRealFft(std::span<const std::complex<double>> half_spectrum,
                                   std::size_t fft_len) {
  Require(half_spectrum.size() == fft_len / 2 + 1, "half spectrum size mismatch");
  auto& fft = Engine();
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum(half_spectrum.begin(), half_spectrum.end());
  std::vector<double> out;
  fft.inv(out, spectrum, static_cast<Eigen::Index>(fft_len));
  return out;
}

std::vector<double> PowerSpectrum(std::span<const double> frame, std::size_t fft_len) {
  const auto spectrum = RealFft(frame, fft_len);
  std::vector<double> power(spectrum.size());
  std::transform(spectrum.begin(), spectrum.end(), power.begin(),
                 [](const std::complex<double>& c) { return std::norm(c); });
  return power;
}

double BandEnergy(std::span<const double> power, double sample_rate_hz, double lo_hz,
                  double hi_hz) {
  if (power.size() < 2) return 0.0;
  const double nyquist = 0.5 * sample_rate_hz;
  const double bin_hz = nyquist / static_cast<double>(power.size() - 1);
  double sum = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double f = k * bin_hz;
    const bool inside = f >= lo_hz && (f < hi_hz || (k + 1 == power.size() && hi_hz >= nyquist));
    if (inside) sum += power[k];
  }
  return sum;
}

}  // namespace bwesid
