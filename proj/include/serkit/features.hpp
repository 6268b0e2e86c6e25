#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "serkit/audio.hpp"
#include "serkit/dsp.hpp"

namespace serkit {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidRange : public FeatureError {
 public:
  using FeatureError::FeatureError;
};

class DimensionMismatch : public FeatureError {
 public:
  using FeatureError::FeatureError;
};

class BandOutOfRange : public FeatureError {
 public:
  using FeatureError::FeatureError;
};

enum class FeatureKind { Mfcc, Melspec, Contrast, Chroma, Cens, Zcr, Tonnetz, Stft };

const char* kind_name(FeatureKind kind);
std::optional<FeatureKind> kind_from_name(const std::string& name);
std::vector<FeatureKind> parse_kind_list(const std::string& csv);

/// Per-frame feature rows; row count is fixed per kind (e.g. MFCC=20).
struct FeatureMatrix {
  FeatureKind kind;
  Mat values;  // rows x n_frames
};

/// Triangular mel filters; each row has one contiguous support with peak 1.
struct MelFilterbank {
  Mat weights;  // n_mels x (n_fft/2 + 1)
  std::vector<double> centers_hz;
  double fmin = 0.0, fmax = 0.0;
};

/// Time-aggregated fixed-length vector with a self-describing layout.
struct FeatureVector {
  struct Segment {
    FeatureKind kind;
    std::size_t offset = 0;
    std::size_t length = 0;
  };
  std::vector<double> values;
  std::vector<Segment> layout;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// HTK-style bank: n_mels + 2 corner points equally spaced in mel between
/// mel(fmin) and mel(fmax).
MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sr, double fmin, double fmax);

FeatureMatrix melspectrogram(const AudioClip& clip, const SpectrogramParams& params, const MelFilterbank& bank);
FeatureMatrix mfcc(const AudioClip& clip, const SpectrogramParams& params, const MelFilterbank& bank,
                   std::size_t n_mfcc = 20);
FeatureMatrix zcr(const AudioClip& clip, std::size_t frame_len, std::size_t hop);
FeatureMatrix chromagram(const AudioClip& clip, const SpectrogramParams& params);
FeatureMatrix cens(const FeatureMatrix& chroma, std::size_t smooth_win = 41, std::size_t downsample = 10);
FeatureMatrix spectral_contrast(const AudioClip& clip, const SpectrogramParams& params, double fmin = 200.0,
                                std::size_t n_bands = 6, double alpha = 0.02);
FeatureMatrix tonnetz(const FeatureMatrix& chroma);
FeatureMatrix stft_feature(const AudioClip& clip, const SpectrogramParams& params);

/// Arithmetic mean across the time axis.
std::vector<double> aggregate(const FeatureMatrix& fm);

/// Extraction parameters for the canonical pipeline. Defaults follow the
/// reference analysis stack: 22050 Hz, n_fft 2048, hop 512, 128 mel bands,
/// 20 cepstral coefficients.
struct ExtractorConfig {
  int sample_rate = 22050;
  SpectrogramParams spec{2048, 512};
  std::size_t n_mels = 128;
  std::size_t n_mfcc = 20;
  double mel_fmin = 0.0;
  double mel_fmax = 0.0;  // 0 -> sr/2
  double contrast_fmin = 200.0;
  std::size_t contrast_bands = 6;
  double contrast_alpha = 0.02;
  std::size_t cens_smooth = 41;
  std::size_t cens_downsample = 10;
};

std::size_t feature_dim(FeatureKind kind, const ExtractorConfig& cfg);

/// Shared-state extractor: builds the mel bank once, resamples input clips
/// to the canonical rate, and reuses the power spectrogram across kinds.
class Extractor {
 public:
  explicit Extractor(ExtractorConfig cfg = {});

  const ExtractorConfig& config() const { return cfg_; }
  const MelFilterbank& bank() const { return bank_; }

  FeatureMatrix extract(const AudioClip& clip, FeatureKind kind) const;

  /// Concatenation of aggregate() per kind, in order; kinds must be distinct.
  FeatureVector vector(const AudioClip& clip, std::span<const FeatureKind> kinds) const;

 private:
  ExtractorConfig cfg_;
  MelFilterbank bank_;
};

FeatureVector feature_vector(const AudioClip& clip, std::span<const FeatureKind> kinds,
                             const ExtractorConfig& cfg = {});

/// Columnar text format: one line per clip, `clip_id<TAB>v0,v1,...`.
/// A sidecar header at <path>.layout.json records kind/offset/length
/// triples so the vectors are self-describing.
void write_feature_file(const std::filesystem::path& path, const std::vector<std::string>& ids, const Mat& vectors,
                        const std::vector<FeatureVector::Segment>& layout);

struct FeatureFile {
  std::vector<std::string> ids;
  Mat vectors;  // n x dim
  std::vector<FeatureVector::Segment> layout;
};

FeatureFile read_feature_file(const std::filesystem::path& path);

}  // namespace serkit
