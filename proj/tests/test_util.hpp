#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bwesid/audio_io.hpp"
#include "bwesid/bwe.hpp"
#include "bwesid/types.hpp"

namespace bwesid::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "bwesid");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

AudioBuffer Sine(double freq_hz, double amplitude, double seconds, int rate);
AudioBuffer Noise(double stddev, double seconds, int rate, std::uint64_t seed);
AudioBuffer Silence(double seconds, int rate);

// Symmetric positive definite P x P matrix with a controlled spread of eigenvalues.
Matrix RandomSpd(int p, std::mt19937_64& rng, double log_spread = 2.0);

// Small BWE model trained once per process on synthetic speech (M = 4).
const BweModel& SharedBweModel();

// Band energy of a signal through a Hann-windowed periodogram average.
double BandPowerDb(const std::vector<double>& x, int rate, double lo_hz, double hi_hz);

}  // namespace bwesid::testing
