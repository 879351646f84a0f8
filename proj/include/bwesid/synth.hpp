#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bwesid/audio_io.hpp"
#include "bwesid/experiments.hpp"

namespace bwesid {

// Source-filter description of a synthetic talker.
struct VoiceProfile {
  double f0_hz = 120.0;
  double tract_scale = 1.0;      // formants are divided by this (longer tract, lower formants)
  double glottal_pole = 0.95;    // spectral tilt of the glottal pulse
  double breathiness = 0.05;     // aspiration noise relative to the pulse
  double high_formant1_hz = 4800.0;
  double high_formant2_hz = 6800.0;
  double fricative_hz = 5000.0;
  double fricative_level = 0.3;
  double vowel_offsets[9][3] = {};  // per-vowel formant deviations (fractions)
};

VoiceProfile RandomVoice(std::uint64_t seed);

// Random read-speech-like babble: vowels, fricatives and pauses. Always
// synthesised at 16 kHz; 8 kHz output is decimated from it.
AudioBuffer SynthesizeSpeech(const VoiceProfile& voice, double seconds, int sample_rate_hz,
                             std::uint64_t seed);

struct SynthCorpusConfig {
  int speakers = 10;
  double train_seconds = 60.0;
  int test_files = 5;
  double test_seconds = 2.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 20020523;
  std::string id_prefix = "spk";
};

// Writes <dir>/<id>/train_01.wav, <dir>/<id>/test_NN.wav and <dir>/manifest.txt.
CorpusManifest GenerateCorpus(const std::filesystem::path& dir, const SynthCorpusConfig& config);

}  // namespace bwesid
