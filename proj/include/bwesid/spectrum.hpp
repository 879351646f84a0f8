#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bwesid {

std::size_t NextPowerOfTwo(std::size_t n);

// Half spectrum (fft_len / 2 + 1 bins) of a zero-padded real frame.
std::vector<std::complex<double>> RealFft(std::span<const double> frame, std::size_t fft_len);

// Inverse of RealFft; returns fft_len real samples.
std::vector<double> InverseRealFft(std::span<const std::complex<double>> half_spectrum,
                                   std::size_t fft_len);

// |X[k]|^2 for k = 0 .. fft_len / 2.
std::vector<double> PowerSpectrum(std::span<const double> frame, std::size_t fft_len);

// Sum of power-spectrum bins whose centre frequency lies in [lo_hz, hi_hz).
// The bin at exactly fs/2 is included when hi_hz >= fs/2.
double BandEnergy(std::span<const double> power, double sample_rate_hz, double lo_hz,
                  double hi_hz);

}  // namespace bwesid
