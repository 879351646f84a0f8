#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bwesid/audio_io.hpp"
#include "bwesid/density.hpp"
#include "bwesid/features.hpp"

namespace bwesid {

// Analysis settings shared by training and extension. Serialised with the model.
struct BweFeatureConfig {
  int narrow_cepstra = kNarrowCepstra;
  int high_cepstra = kHighEnvelopeCepstra;
  double frame_ms = 30.0;  // analysis frame at both rates
  Overlap overlap{2, 3};
  std::uint32_t narrow_fft_len = 256;  // 8 kHz analysis
  std::uint32_t wide_fft_len = 512;    // 16 kHz analysis and synthesis
  int narrow_filters = 0;              // 0: DefaultMelFilterCount(8000)
  double narrow_mel_lo_hz = kNarrowLoHz;
  double narrow_mel_hi_hz = kNarrowHiHz;
  std::uint32_t synthesis_len = 320;   // 16 kHz samples, 50 % overlap-add

  // Joint vector layout: [narrow cepstra, voicing, high-band envelope, energy ratio].
  int narrow_dim() const { return narrow_cepstra + 1; }
  int joint_dim() const { return narrow_dim() + high_cepstra + 1; }
  int energy_index() const { return joint_dim() - 1; }

  bool operator==(const BweFeatureConfig&) const = default;
};

struct BweModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  Gmm joint;
  BweFeatureConfig features;
  std::uint32_t format_version = kFormatVersion;

  int dimension() const { return joint.dimension(); }
  // narrowband features -> energy ratio
  BlockSplit EnergySplit() const;
  // narrowband features + energy ratio -> high-band envelope
  BlockSplit EnvelopeSplit() const;
  // Throws when the mixture does not match the feature layout.
  void Validate() const;
};

struct BweTrainConfig {
  BweFeatureConfig features;
  EmConfig em;
  double min_training_seconds = 60.0;
  // Frames whose narrowband energy is this far below the loudest frame are
  // left out of the joint training set.
  double silence_floor_db = -60.0;
};

// Joint training vectors for one 16 kHz buffer: each row pairs the narrowband
// description of a frame with its true high-band description.
struct JointFrames {
  RowMatrix vectors;                // frames x joint_dim
  std::vector<double> narrow_energy;  // energy of each narrowband frame
};
JointFrames JointTrainingVectors(const AudioBuffer& wideband, const BweFeatureConfig& config);

// Narrowband feature vector (cepstra then voicing) of an 8 kHz frame taken
// without a window; the cepstra use a Hamming window internally.
std::vector<double> NarrowbandFeature(std::span<const double> frame, const MelCepstrum& analyzer);
MelCepstrum MakeNarrowbandAnalyzer(const BweFeatureConfig& config);

BweModel BweTrain(const std::vector<AudioBuffer>& wideband, const BweTrainConfig& config);

struct ExtendOptions {
  double over_penalty = 3.0;   // cost per dB of over-estimated energy ratio
  double under_penalty = 1.0;  // cost per dB of under-estimated energy ratio
};

struct FrameReport {
  std::size_t start = 0;          // first 16 kHz output sample of the frame
  bool active = false;            // a high band was synthesised
  double estimated_ratio_db = 0;  // the asymmetric-cost estimate
  double achieved_ratio_db = 0;   // measured on the synthesised frame
};

struct ExtendResult {
  AudioBuffer audio;
  std::vector<FrameReport> frames;
};

ExtendResult BweExtendDetailed(const AudioBuffer& narrowband, const BweModel& model,
                               const ExtendOptions& options = {});
AudioBuffer BweExtend(const AudioBuffer& narrowband, const BweModel& model,
                      const ExtendOptions& options = {});

enum class Variant { kOrig, kNb, kBwe, kIsdn, kIsdnBwe };
std::string ToString(Variant v);
Variant ParseVariant(const std::string& text);
bool VariantNeedsModel(Variant v);
// Sample rate a variant expects at its input.
int VariantInputRate(Variant v);

AudioBuffer MakeVariant(const AudioBuffer& buffer, Variant variant, const BweModel* model,
                        const ExtendOptions& options = {});

// "BWEM" file: magic, format version, feature block, length-prefixed GMM1
// payload, FNV-1a checksum.
std::vector<std::uint8_t> EncodeBweModel(const BweModel& model);
BweModel DecodeBweModel(std::vector<std::uint8_t> bytes);
void SaveBweModel(const BweModel& model, const std::filesystem::path& path);
BweModel LoadBweModel(const std::filesystem::path& path);

}  // namespace bwesid
