#include "bwesid/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <random>

#include "bwesid/dsp.hpp"
#include "bwesid/error.hpp"

namespace bwesid {
namespace {

constexpr int kRate = 16000;
constexpr int kBlock = 16;  // samples between coefficient updates

// Average adult formants (F1, F2, F3) for nine English vowels.
constexpr double kVowels[9][3] = {
    {270, 2290, 3010}, {390, 1990, 2550}, {530, 1840, 2480}, {660, 1720, 2410}, {730, 1090, 2440},
    {570, 840, 2410},  {440, 1020, 2240}, {300, 870, 2240},  {490, 1350, 1690},
};
constexpr double kF4 = 3500.0;

class Random {
 public:
  explicit Random(std::uint64_t seed) : rng_(seed) {}
  double Uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = Uniform();
    while (u <= 0.0) u = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double t = 2.0 * std::numbers::pi * Uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }
  std::uint64_t Next() { return rng_(); }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Two-pole resonator with unity gain at DC.
struct Resonator {
  double a = 1, b = 0, c = 0, y1 = 0, y2 = 0;
  void Tune(double freq, double bw) {
    const double r = std::exp(-std::numbers::pi * bw / kRate);
    b = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / kRate);
    c = -r * r;
    a = 1.0 - b - c;
  }
  double operator()(double x) {
    const double y = a * x + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

enum class Phone { kVowel, kFricative, kPause };

struct Segment {
  Phone phone;
  std::size_t length;
  std::array<double, 4> formants;
};

double Smooth(double current, double target, double coeff) { return current + coeff * (target - current); }

void NormalizeRms(std::vector<double>& x, const std::vector<char>& active, double target) {
  double e = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (active[i]) {
      e += x[i] * x[i];
      ++n;
    }
  }
  if (n == 0 || e <= 0.0) return;
  const double g = target / std::sqrt(e / static_cast<double>(n));
  for (double& v : x) v *= g;
}

}  // namespace

VoiceProfile RandomVoice(std::uint64_t seed) {
  Random r(seed);
  VoiceProfile v;
  const bool low = r.Uniform() < 0.5;
  v.f0_hz = low ? r.Uniform(85.0, 140.0) : r.Uniform(160.0, 230.0);
  v.tract_scale = low ? r.Uniform(0.98, 1.18) : r.Uniform(0.85, 1.02);
  v.glottal_pole = r.Uniform(0.90, 0.975);
  v.breathiness = r.Uniform(0.02, 0.15);
  v.high_formant1_hz = r.Uniform(4300.0, 5500.0);
  v.high_formant2_hz = r.Uniform(6000.0, 7500.0);
  v.fricative_hz = r.Uniform(3500.0, 7000.0);
  v.fricative_level = r.Uniform(0.15, 0.45);
  for (auto& vowel : v.vowel_offsets) {
    for (double& d : vowel) d = r.Uniform(-0.06, 0.06);
  }
  return v;
}

AudioBuffer SynthesizeSpeech(const VoiceProfile& voice, double seconds, int sample_rate_hz,
                             std::uint64_t seed) {
  Require(seconds > 0.0, "synthesis duration must be positive");
  Require(sample_rate_hz == 16000 || sample_rate_hz == 8000, "synthesis supports 8 or 16 kHz");
  Random r(seed);
  const auto total = static_cast<std::size_t>(std::llround(seconds * kRate));

  // Per-utterance drift of the talker.
  const double f0_base = voice.f0_hz * r.Uniform(0.95, 1.05);
  const double scale = voice.tract_scale * r.Uniform(0.99, 1.01);

  const std::size_t edge = kRate / 10;
  std::vector<Segment> plan;
  plan.push_back({Phone::kPause, std::min(edge, total), {500, 1500, 2500, kF4}});
  std::size_t planned = plan.back().length;
  while (planned < total) {
    const double u = r.Uniform();
    Segment s{};
    if (u < 0.65 || plan.back().phone == Phone::kPause) {
      const int k = static_cast<int>(r.Uniform() * 9.0) % 9;
      s.phone = Phone::kVowel;
      s.length = static_cast<std::size_t>(r.Uniform(0.09, 0.22) * kRate);
      for (int f = 0; f < 3; ++f) {
        s.formants[f] = kVowels[k][f] * (1.0 + voice.vowel_offsets[k][f]) * r.Uniform(0.97, 1.03) / scale;
      }
      s.formants[3] = kF4 * r.Uniform(0.98, 1.02) / scale;
    } else if (u < 0.85) {
      s = plan.back();
      s.phone = Phone::kFricative;
      s.length = static_cast<std::size_t>(r.Uniform(0.07, 0.14) * kRate);
    } else {
      s = plan.back();
      s.phone = Phone::kPause;
      s.length = static_cast<std::size_t>(r.Uniform(0.08, 0.2) * kRate);
    }
    plan.push_back(s);
    planned += s.length;
  }

  std::vector<double> voiced(total, 0.0), fric(total, 0.0);
  std::vector<char> voiced_active(total, 0), fric_active(total, 0);
  std::array<Resonator, 6> tract;
  Resonator frication;
  frication.Tune(voice.fricative_hz, 1200.0);
  const std::array<double, 6> bandwidths{70.0, 100.0, 140.0, 200.0, 300.0, 450.0};
  std::array<double, 4> formants = plan.front().formants;
  double amp_v = 0.0, amp_f = 0.0, phase = 0.0, period_f0 = f0_base;
  double g1 = 0.0, g2 = 0.0, tilt = 0.0, prev_tract = 0.0, prev_fric = 0.0;
  const double form_coeff = 1.0 - std::exp(-static_cast<double>(kBlock) / (0.015 * kRate));
  const double amp_coeff = 1.0 - std::exp(-1.0 / (0.004 * kRate));
  const double vibrato_rate = r.Uniform(0.6, 1.1);
  const double vibrato_phase = r.Uniform(0.0, 2.0 * std::numbers::pi);

  std::size_t seg = 0, seg_left = plan.front().length, n = 0;
  while (n < total) {
    const Segment& s = plan[seg];
    if (n % kBlock == 0) {
      for (int f = 0; f < 4; ++f) formants[f] = Smooth(formants[f], s.formants[f], form_coeff);
      for (int f = 0; f < 4; ++f) tract[f].Tune(formants[f], bandwidths[f]);
      tract[4].Tune(voice.high_formant1_hz, bandwidths[4]);
      tract[5].Tune(voice.high_formant2_hz, bandwidths[5]);
    }
    const double t = static_cast<double>(n) / kRate;
    const double declination = 1.1 - 0.2 * t / seconds;
    const double f0 = f0_base * declination *
                      (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * vibrato_rate * t + vibrato_phase));

    const double target_v = s.phone == Phone::kVowel ? 1.0 : 0.0;
    const double target_f = s.phone == Phone::kFricative ? 1.0 : 0.0;
    amp_v = Smooth(amp_v, target_v, amp_coeff);
    amp_f = Smooth(amp_f, target_f, amp_coeff);

    phase += period_f0 / kRate;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
      period_f0 = f0 * (1.0 + 0.01 * r.Gauss());  // jitter
    }
    const double noise = r.Gauss();
    const double g = pulse + 2.0 * voice.glottal_pole * g1 - voice.glottal_pole * voice.glottal_pole * g2;
    g2 = g1;
    g1 = g;
    double x = amp_v * (g * (1.0 - voice.glottal_pole) * (1.0 - voice.glottal_pole) +
                        voice.breathiness * 0.05 * noise);
    for (Resonator& res : tract) x = res(x);
    tilt = 0.5 * tilt + 0.5 * x;
    voiced[n] = tilt - prev_tract;  // lip radiation
    x = tilt;
    prev_tract = x;
    voiced_active[n] = target_v > 0.0;

    const double fn = frication(r.Gauss()) * amp_f;
    fric[n] = fn - prev_fric;
    prev_fric = fn;
    fric_active[n] = target_f > 0.0;

    ++n;
    if (--seg_left == 0 && seg + 1 < plan.size()) seg_left = plan[++seg].length;
  }

  NormalizeRms(voiced, voiced_active, 1.0);
  NormalizeRms(fric, fric_active, voice.fricative_level);
  const double gain = 0.06 * std::pow(10.0, r.Uniform(-2.0, 2.0) / 20.0);
  AudioBuffer out;
  out.sample_rate_hz = kRate;
  out.samples.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    // Fade-in/out over the first and last 10 ms.
    const double ramp = std::min({1.0, static_cast<double>(i) / (0.01 * kRate),
                                  static_cast<double>(total - 1 - i) / (0.01 * kRate)});
    out.samples[i] = gain * (ramp * (voiced[i] + fric[i]) + 1e-3 * r.Gauss());
  }
  return sample_rate_hz == kRate ? out : Downsample2x(out);
}

CorpusManifest GenerateCorpus(const std::filesystem::path& dir, const SynthCorpusConfig& config) {
  Require(config.speakers >= 2, "a corpus needs at least two speakers");
  Require(config.test_files >= 1, "at least one test file per speaker");
  CorpusManifest manifest;
  manifest.root = dir;
  manifest.source_rate = config.sample_rate_hz;
  manifest.train_seconds = config.train_seconds;
  manifest.test_seconds = config.test_seconds;
  Random seeds(config.seed);
  for (int s = 0; s < config.speakers; ++s) {
    char id[64];
    std::snprintf(id, sizeof id, "%s%02d", config.id_prefix.c_str(), s + 1);
    const VoiceProfile voice = RandomVoice(seeds.Next());
    SpeakerEntry entry;
    entry.speaker_id = id;
    std::filesystem::create_directories(dir / id);
    const std::string train = std::string(id) + "/train_01.wav";
    WriteWav(SynthesizeSpeech(voice, config.train_seconds, config.sample_rate_hz, seeds.Next()), dir / train);
    entry.train_files.push_back(train);
    for (int k = 0; k < config.test_files; ++k) {
      char name[96];
      std::snprintf(name, sizeof name, "%s/test_%02d.wav", id, k + 1);
      WriteWav(SynthesizeSpeech(voice, config.test_seconds, config.sample_rate_hz, seeds.Next()), dir / name);
      entry.test_files.push_back(name);
    }
    manifest.speakers.push_back(std::move(entry));
  }
  WriteManifest(manifest, dir / "manifest.txt");
  return manifest;
}

}  // namespace bwesid
