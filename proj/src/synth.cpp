#include "serkit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <iterator>
#include <numbers>
#include <random>

#include "serkit/audio.hpp"

namespace serkit {

namespace {

struct SynthClass {
  const char* emotion;
  double f0_lo, f0_hi;  // Hz, before gender/language shifts
  double am_rate;       // Hz
  double noise;         // relative to harmonic RMS
};

constexpr SynthClass kClasses[] = {
    {"Neutral", 100.0, 115.0, 1.5, 0.002}, {"Joy", 140.0, 160.0, 3.0, 0.006},
    {"Sadness", 195.0, 220.0, 4.5, 0.02},  {"Anger", 270.0, 305.0, 6.0, 0.05},
    {"Fear", 380.0, 430.0, 8.0, 0.12},     {"Disgust", 530.0, 600.0, 10.0, 0.25},
};

struct LanguageProfile {
  double formant_center, formant_width;  // Gaussian band-pass bump, Hz
  double pitch_warp;
};

LanguageProfile language_profile(std::size_t index) {
  // distinct spectral envelopes so cross-language transfer degrades
  if (index % 2 == 0) return {700.0, 350.0, 1.0};
  return {2400.0, 700.0, 1.12};
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::uint64_t clip_seed(std::uint64_t base, std::size_t lang, std::size_t cls, std::size_t gender,
                        std::size_t idx) {
  std::uint64_t x = base ^ (lang * 0x9E3779B97F4A7C15ULL) ^ (cls * 0xC2B2AE3D27D4EB4FULL) ^
                    (gender * 0x165667B19E3779F9ULL) ^ (idx * 0x27D4EB2F165667C5ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

AudioClip synth_clip(const SynthClass& cls, bool female, const LanguageProfile& lang, const SynthConfig& cfg,
                     std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(cfg.duration_s * cfg.sample_rate);
  const double gender_shift = female ? std::pow(2.0, 4.0 / 12.0) : std::pow(2.0, -4.0 / 12.0);
  const double f0 = uniform(rng, cls.f0_lo, cls.f0_hi) * gender_shift * lang.pitch_warp;

  // harmonic stack shaped by the language's formant bump
  std::vector<double> amp, phase;
  for (int h = 1; h <= 16; ++h) {
    const double fh = f0 * h;
    if (fh >= 0.45 * cfg.sample_rate) break;
    const double z = (fh - lang.formant_center) / lang.formant_width;
    const double gain = 0.06 + std::exp(-0.5 * z * z);
    amp.push_back(gain / h);
    phase.push_back(uniform(rng, 0.0, 2.0 * std::numbers::pi));
  }

  AudioClip clip;
  clip.sample_rate = cfg.sample_rate;
  clip.samples.resize(n);

  double harm_rms = 0.0;
  for (double a : amp) harm_rms += 0.5 * a * a;
  harm_rms = std::sqrt(harm_rms);

  const double target = uniform(rng, 0.45, 0.85);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.sample_rate;
    double s = 0.0;
    for (std::size_t h = 0; h < amp.size(); ++h)
      s += amp[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t + phase[h]);
    const double env = (1.0 + 0.85 * std::sin(2.0 * std::numbers::pi * cls.am_rate * t)) / 1.85;
    s = s / harm_rms * env + cls.noise * gauss(rng);
    clip.samples[i] = s;
    peak = std::max(peak, std::abs(s));
  }
  if (peak > 0.0)
    for (double& s : clip.samples) s *= target / peak;
  return clip;
}

}  // namespace

Manifest generate_synthetic_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  Manifest manifest;
  for (std::size_t li = 0; li < cfg.languages.size(); ++li) {
    const std::string& language = cfg.languages[li];
    const LanguageProfile profile = language_profile(li);
    std::filesystem::create_directories(out_dir / language);

    for (std::size_t ci = 0; ci < std::size(kClasses); ++ci) {
      for (std::size_t gi = 0; gi < 2; ++gi) {
        const bool female = gi == 1;
        for (std::size_t k = 0; k < cfg.clips_per_class_per_gender; ++k) {
          std::mt19937_64 rng(clip_seed(cfg.seed, li, ci, gi, k));
          const AudioClip clip = synth_clip(kClasses[ci], female, profile, cfg, rng);

          char name[96];
          std::snprintf(name, sizeof(name), "%s-%s-%02zu.wav", kClasses[ci].emotion, female ? "f" : "m", k);
          const std::filesystem::path rel = std::filesystem::path(language) / name;
          write_wav(out_dir / rel, clip);

          Utterance u;
          u.path = rel.generic_string();
          u.dataset = "SYNTH";
          u.language = language;
          u.speaker = language + (female ? "-f" : "-m") + std::to_string(k % 4);
          u.gender = female ? "female" : "male";
          u.emotion = kClasses[ci].emotion;
          manifest.push_back(std::move(u));
        }
      }
    }
  }
  return manifest;
}

}  // namespace serkit
