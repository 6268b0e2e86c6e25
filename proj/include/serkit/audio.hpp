#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace serkit {

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RIFF/WAVE structure violations: bad magic, truncated chunks.
class MalformedContainer : public AudioError {
 public:
  using AudioError::AudioError;
};

/// Compression codes other than PCM-16 or IEEE float-32.
class UnsupportedEncoding : public AudioError {
 public:
  using AudioError::AudioError;
};

class EmptyAudio : public AudioError {
 public:
  using AudioError::AudioError;
};

/// Mono sample buffer in [-1, 1] at a fixed rate; the unit of ingestion.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_path;
};

/// Decode a RIFF/WAVE file. Accepts PCM 16-bit and IEEE 32-bit float,
/// 1 or 2 channels (stereo is averaged to mono), and
/// WAVE_FORMAT_EXTENSIBLE when the sub-format maps to either encoding.
/// Unknown chunks are skipped. Integer samples are divided by 32768.
AudioClip load_wav(const std::filesystem::path& path);

/// Write a mono clip as 16-bit PCM.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Polyphase windowed-sinc resampler (Hann window, 32 taps per phase).
/// Returns the clip unchanged when target_sr equals the source rate.
AudioClip resample(const AudioClip& clip, int target_sr);

/// (1/N) * sum |sample_i|. Linear scale, not decibels.
double mean_abs_amplitude(const AudioClip& clip);

}  // namespace serkit
