#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "serkit/manifest.hpp"

namespace serkit {

/// Synthetic emotive-speech stand-in for the license-restricted corpora.
/// Six "emotion" classes are separated by fundamental-frequency band,
/// amplitude-modulation rate and noise floor; two "genders" differ by a
/// +-4 semitone pitch offset; two "languages" differ by formant-like
/// band-pass profiles and a small pitch warp.
struct SynthConfig {
  std::vector<std::string> languages = {"synthA", "synthB"};
  std::size_t clips_per_class_per_gender = 8;
  double duration_s = 1.2;
  int sample_rate = 22050;
  std::uint64_t seed = 1234;
};

/// Writes WAV files under out_dir/<language>/ and returns a manifest with
/// paths relative to out_dir. Deterministic in the seed.
Manifest generate_synthetic_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace serkit
