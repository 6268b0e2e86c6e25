#include "serkit/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace serkit {

namespace {

constexpr double kLogFloor = 1e-10;

double log10_compress(double x) { return 10.0 * std::log10(std::max(x, kLogFloor)); }

}  // namespace

const char* kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Mfcc: return "mfcc";
    case FeatureKind::Melspec: return "melspec";
    case FeatureKind::Contrast: return "contrast";
    case FeatureKind::Chroma: return "chroma";
    case FeatureKind::Cens: return "cens";
    case FeatureKind::Zcr: return "zcr";
    case FeatureKind::Tonnetz: return "tonnetz";
    case FeatureKind::Stft: return "stft";
  }
  return "?";
}

std::optional<FeatureKind> kind_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "mfcc") return FeatureKind::Mfcc;
  if (s == "melspec" || s == "mel" || s == "melspectrogram") return FeatureKind::Melspec;
  if (s == "contrast" || s == "spectral_contrast") return FeatureKind::Contrast;
  if (s == "chroma" || s == "chromagram") return FeatureKind::Chroma;
  if (s == "cens") return FeatureKind::Cens;
  if (s == "zcr") return FeatureKind::Zcr;
  if (s == "tonnetz") return FeatureKind::Tonnetz;
  if (s == "stft") return FeatureKind::Stft;
  return std::nullopt;
}

std::vector<FeatureKind> parse_kind_list(const std::string& csv) {
  std::vector<FeatureKind> kinds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto k = kind_from_name(item);
    if (!k) throw FeatureError("unknown feature kind: " + item);
    kinds.push_back(*k);
  }
  if (kinds.empty()) throw FeatureError("empty feature list");
  for (std::size_t i = 0; i < kinds.size(); ++i)
    for (std::size_t j = i + 1; j < kinds.size(); ++j)
      if (kinds[i] == kinds[j]) throw FeatureError("duplicate feature kind in list");
  return kinds;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sr, double fmin, double fmax) {
  if (n_mels < 2) throw InvalidRange("mel_filterbank: need n_mels >= 2");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sr / 2.0))
    throw InvalidRange("mel_filterbank: need 0 <= fmin < fmax <= sr/2");

  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);

  std::vector<double> corners(n_mels + 2);
  for (std::size_t i = 0; i < corners.size(); ++i)
    corners[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  MelFilterbank bank;
  bank.fmin = fmin;
  bank.fmax = fmax;
  bank.weights = Mat(n_mels, n_bins);
  bank.centers_hz.assign(corners.begin() + 1, corners.end() - 1);

  const double bin_hz = static_cast<double>(sr) / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = corners[m], center = corners[m + 1], right = corners[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      bank.weights(m, k) = std::max(0.0, w);
    }
  }
  return bank;
}

FeatureMatrix melspectrogram(const AudioClip& clip, const SpectrogramParams& params, const MelFilterbank& bank) {
  const PowerSpectrogram ps = power_spectrogram(clip, params);
  if (bank.weights.cols != ps.bins.rows)
    throw DimensionMismatch("melspectrogram: bank built for a different n_fft");

  const std::size_t n_mels = bank.weights.rows;
  const std::size_t n_frames = ps.bins.cols;
  FeatureMatrix out{FeatureKind::Melspec, Mat(n_mels, n_frames)};

  for (std::size_t m = 0; m < n_mels; ++m) {
    // filters have contiguous support; skip the zero span
    const double* w = bank.weights.row(m);
    std::size_t lo = 0, hi = bank.weights.cols;
    while (lo < hi && w[lo] == 0.0) ++lo;
    while (hi > lo && w[hi - 1] == 0.0) --hi;
    double* dst = out.values.row(m);
    for (std::size_t k = lo; k < hi; ++k) {
      const double wk = w[k];
      if (wk == 0.0) continue;
      const double* src = ps.bins.row(k);
      for (std::size_t t = 0; t < n_frames; ++t) dst[t] += wk * src[t];
    }
  }
  return out;
}

FeatureMatrix mfcc(const AudioClip& clip, const SpectrogramParams& params, const MelFilterbank& bank,
                   std::size_t n_mfcc) {
  if (n_mfcc > bank.weights.rows) throw DimensionMismatch("mfcc: n_mfcc exceeds mel band count");
  const FeatureMatrix mel = melspectrogram(clip, params, bank);

  const std::size_t n_mels = mel.values.rows;
  const std::size_t n_frames = mel.values.cols;
  FeatureMatrix out{FeatureKind::Mfcc, Mat(n_mfcc, n_frames)};

  std::vector<double> logmel(n_mels);
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) logmel[m] = log10_compress(mel.values(m, t));
    const std::vector<double> c = dct_ii_orthonormal(logmel, n_mfcc);
    for (std::size_t k = 0; k < n_mfcc; ++k) out.values(k, t) = c[k];
  }
  return out;
}

FeatureMatrix zcr(const AudioClip& clip, std::size_t frame_len, std::size_t hop) {
  if (frame_len < 2) throw FeatureError("zcr: frame length must be >= 2");
  if (clip.samples.empty()) throw EmptySignal("zcr: empty clip");

  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = 1 + n / hop;
  const long long pad = static_cast<long long>(frame_len / 2);

  FeatureMatrix out{FeatureKind::Zcr, Mat(1, n_frames)};
  for (std::size_t t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t * hop) - pad;
    std::size_t crossings = 0;
    bool prev_nonneg = clip.samples[reflect_index(start, n)] >= 0.0;
    for (std::size_t j = 1; j < frame_len; ++j) {
      const bool nonneg = clip.samples[reflect_index(start + static_cast<long long>(j), n)] >= 0.0;
      if (nonneg != prev_nonneg) ++crossings;
      prev_nonneg = nonneg;
    }
    out.values(0, t) = static_cast<double>(crossings) / static_cast<double>(frame_len - 1);
  }
  return out;
}

FeatureMatrix chromagram(const AudioClip& clip, const SpectrogramParams& params) {
  const PowerSpectrogram ps = power_spectrogram(clip, params);
  const std::size_t n_bins = ps.bins.rows;
  const std::size_t n_frames = ps.bins.cols;

  // pitch class per FFT bin: p(f) = (round(12*log2(f/440)) + 69) mod 12, C = 0
  std::vector<int> pclass(n_bins, -1);
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * ps.bin_hz;
    const long long midi = std::llround(12.0 * std::log2(f / 440.0)) + 69;
    pclass[k] = static_cast<int>(((midi % 12) + 12) % 12);
  }

  FeatureMatrix out{FeatureKind::Chroma, Mat(12, n_frames)};
  for (std::size_t k = 1; k < n_bins; ++k) {
    double* dst = out.values.row(static_cast<std::size_t>(pclass[k]));
    const double* src = ps.bins.row(k);
    for (std::size_t t = 0; t < n_frames; ++t) dst[t] += src[t];
  }
  for (std::size_t t = 0; t < n_frames; ++t) {
    double mx = 0.0;
    for (std::size_t c = 0; c < 12; ++c) mx = std::max(mx, out.values(c, t));
    if (mx > 0.0)
      for (std::size_t c = 0; c < 12; ++c) out.values(c, t) /= mx;
  }
  return out;
}

FeatureMatrix cens(const FeatureMatrix& chroma, std::size_t smooth_win, std::size_t downsample) {
  if (chroma.values.rows != 12) throw DimensionMismatch("cens: expected 12 chroma rows");
  if (smooth_win < 1 || downsample < 1) throw FeatureError("cens: invalid smoothing parameters");

  const std::size_t n_frames = chroma.values.cols;
  Mat quant(12, n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 12; ++c) sum += chroma.values(c, t);
    for (std::size_t c = 0; c < 12; ++c) {
      const double x = sum > 0.0 ? chroma.values(c, t) / sum : 0.0;
      double q = 0.0;
      if (x >= 0.4) q = 4.0;
      else if (x >= 0.2) q = 3.0;
      else if (x >= 0.1) q = 2.0;
      else if (x >= 0.05) q = 1.0;
      quant(c, t) = q;
    }
  }

  // centered same-length convolution of each row with a Hann window
  const std::vector<double> win = hann_window(smooth_win);
  const long long half = static_cast<long long>(smooth_win) / 2;
  Mat smooth(12, n_frames);
  for (std::size_t c = 0; c < 12; ++c) {
    const double* src = quant.row(c);
    double* dst = smooth.row(c);
    for (std::size_t t = 0; t < n_frames; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < smooth_win; ++j) {
        const long long s = static_cast<long long>(t) + static_cast<long long>(j) - half;
        if (s >= 0 && s < static_cast<long long>(n_frames)) acc += win[j] * src[s];
      }
      dst[t] = acc;
    }
  }

  const std::size_t n_out = (n_frames + downsample - 1) / downsample;
  FeatureMatrix out{FeatureKind::Cens, Mat(12, n_out)};
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t t = i * downsample;
    double norm = 0.0;
    for (std::size_t c = 0; c < 12; ++c) norm += smooth(c, t) * smooth(c, t);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < 12; ++c) out.values(c, i) = norm > 0.0 ? smooth(c, t) / norm : 0.0;
  }
  return out;
}

FeatureMatrix spectral_contrast(const AudioClip& clip, const SpectrogramParams& params, double fmin,
                                std::size_t n_bands, double alpha) {
  if (fmin <= 0.0) throw InvalidRange("spectral_contrast: fmin must be positive");
  if (alpha <= 0.0 || alpha > 1.0) throw InvalidRange("spectral_contrast: alpha must be in (0, 1]");

  const double nyquist = clip.sample_rate / 2.0;
  // every band must start below Nyquist; the top band is clipped to it
  if (fmin * std::pow(2.0, static_cast<double>(n_bands - 1)) >= nyquist)
    throw BandOutOfRange("spectral_contrast: octave bands exceed Nyquist");

  const PowerSpectrogram ps = power_spectrogram(clip, params);
  const std::size_t n_bins = ps.bins.rows;
  const std::size_t n_frames = ps.bins.cols;
  const std::size_t n_rows = n_bands + 1;  // sub-fmin band + octave bands

  // contiguous bin ranges [lo, hi) per band
  std::vector<std::pair<std::size_t, std::size_t>> ranges(n_rows);
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < n_rows; ++b) {
    const double hi_hz = fmin * std::pow(2.0, static_cast<double>(b));
    std::size_t hi = cursor;
    if (b + 1 == n_rows) {
      hi = n_bins;
    } else {
      while (hi < n_bins && static_cast<double>(hi) * ps.bin_hz < hi_hz) ++hi;
    }
    ranges[b] = {cursor, hi};
    cursor = hi;
  }

  FeatureMatrix out{FeatureKind::Contrast, Mat(n_rows, n_frames)};
  std::vector<double> band;
  for (std::size_t b = 0; b < n_rows; ++b) {
    const auto [lo, hi] = ranges[b];
    const std::size_t m = hi - lo;
    if (m == 0) continue;  // degenerate band at very low rates; row stays 0
    const std::size_t cnt = std::min<std::size_t>(m, static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m))));
    for (std::size_t t = 0; t < n_frames; ++t) {
      band.resize(m);
      for (std::size_t k = 0; k < m; ++k) band[k] = ps.bins(lo + k, t);
      std::sort(band.begin(), band.end());
      double valley = 0.0, peak = 0.0;
      for (std::size_t k = 0; k < cnt; ++k) {
        valley += band[k];
        peak += band[m - 1 - k];
      }
      valley /= static_cast<double>(cnt);
      peak /= static_cast<double>(cnt);
      out.values(b, t) = log10_compress(peak) - log10_compress(valley);
    }
  }
  return out;
}

FeatureMatrix tonnetz(const FeatureMatrix& chroma) {
  if (chroma.values.rows != 12) throw DimensionMismatch("tonnetz: expected 12 chroma rows");
  const std::size_t n_frames = chroma.values.cols;

  // circle angles per pitch class: perfect fifth, minor third, major third
  constexpr double r1 = 1.0, r2 = 1.0, r3 = 0.5;
  std::vector<std::array<double, 6>> basis(12);
  for (std::size_t k = 0; k < 12; ++k) {
    const double a5 = static_cast<double>(k) * 7.0 * std::numbers::pi / 6.0;
    const double am3 = static_cast<double>(k) * 3.0 * std::numbers::pi / 2.0;
    const double aM3 = static_cast<double>(k) * 2.0 * std::numbers::pi / 3.0;
    basis[k] = {r1 * std::sin(a5), r1 * std::cos(a5), r2 * std::sin(am3),
                r2 * std::cos(am3), r3 * std::sin(aM3), r3 * std::cos(aM3)};
  }

  FeatureMatrix out{FeatureKind::Tonnetz, Mat(6, n_frames)};
  for (std::size_t t = 0; t < n_frames; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 12; ++k) sum += chroma.values(k, t);
    if (sum <= 0.0) continue;
    for (std::size_t k = 0; k < 12; ++k) {
      const double c = chroma.values(k, t) / sum;
      for (std::size_t d = 0; d < 6; ++d) out.values(d, t) += c * basis[k][d];
    }
  }
  return out;
}

FeatureMatrix stft_feature(const AudioClip& clip, const SpectrogramParams& params) {
  const PowerSpectrogram ps = power_spectrogram(clip, params);
  FeatureMatrix out{FeatureKind::Stft, Mat(ps.bins.rows, ps.bins.cols)};
  for (std::size_t i = 0; i < ps.bins.v.size(); ++i) out.values.v[i] = std::sqrt(ps.bins.v[i]);
  return out;
}

std::vector<double> aggregate(const FeatureMatrix& fm) {
  if (fm.values.cols == 0) throw FeatureError("aggregate: no frames");
  std::vector<double> mean(fm.values.rows, 0.0);
  for (std::size_t r = 0; r < fm.values.rows; ++r) {
    const double* row = fm.values.row(r);
    double acc = 0.0;
    for (std::size_t t = 0; t < fm.values.cols; ++t) acc += row[t];
    mean[r] = acc / static_cast<double>(fm.values.cols);
  }
  return mean;
}

std::size_t feature_dim(FeatureKind kind, const ExtractorConfig& cfg) {
  switch (kind) {
    case FeatureKind::Mfcc: return cfg.n_mfcc;
    case FeatureKind::Melspec: return cfg.n_mels;
    case FeatureKind::Contrast: return cfg.contrast_bands + 1;
    case FeatureKind::Chroma: return 12;
    case FeatureKind::Cens: return 12;
    case FeatureKind::Zcr: return 1;
    case FeatureKind::Tonnetz: return 6;
    case FeatureKind::Stft: return cfg.spec.n_fft / 2 + 1;
  }
  return 0;
}

Extractor::Extractor(ExtractorConfig cfg) : cfg_(cfg) {
  const double fmax = cfg_.mel_fmax > 0.0 ? cfg_.mel_fmax : cfg_.sample_rate / 2.0;
  bank_ = mel_filterbank(cfg_.n_mels, cfg_.spec.n_fft, cfg_.sample_rate, cfg_.mel_fmin, fmax);
}

FeatureMatrix Extractor::extract(const AudioClip& clip, FeatureKind kind) const {
  const AudioClip& c = clip.sample_rate == cfg_.sample_rate ? clip : resample(clip, cfg_.sample_rate);
  switch (kind) {
    case FeatureKind::Mfcc: return mfcc(c, cfg_.spec, bank_, cfg_.n_mfcc);
    case FeatureKind::Melspec: return melspectrogram(c, cfg_.spec, bank_);
    case FeatureKind::Contrast:
      return spectral_contrast(c, cfg_.spec, cfg_.contrast_fmin, cfg_.contrast_bands, cfg_.contrast_alpha);
    case FeatureKind::Chroma: return chromagram(c, cfg_.spec);
    case FeatureKind::Cens: return cens(chromagram(c, cfg_.spec), cfg_.cens_smooth, cfg_.cens_downsample);
    case FeatureKind::Zcr: return zcr(c, cfg_.spec.n_fft, cfg_.spec.hop);
    case FeatureKind::Tonnetz: return tonnetz(chromagram(c, cfg_.spec));
    case FeatureKind::Stft: return stft_feature(c, cfg_.spec);
  }
  throw FeatureError("extract: unknown kind");
}

FeatureVector Extractor::vector(const AudioClip& clip, std::span<const FeatureKind> kinds) const {
  if (kinds.empty()) throw FeatureError("feature_vector: empty kind set");
  for (std::size_t i = 0; i < kinds.size(); ++i)
    for (std::size_t j = i + 1; j < kinds.size(); ++j)
      if (kinds[i] == kinds[j]) throw FeatureError("feature_vector: kinds must be distinct");

  const AudioClip resampled = clip.sample_rate == cfg_.sample_rate ? clip : resample(clip, cfg_.sample_rate);

  // reuse chroma across dependent kinds
  std::optional<FeatureMatrix> chroma_fm;
  auto chroma_ref = [&]() -> const FeatureMatrix& {
    if (!chroma_fm) chroma_fm = chromagram(resampled, cfg_.spec);
    return *chroma_fm;
  };

  FeatureVector fv;
  for (FeatureKind kind : kinds) {
    std::vector<double> agg;
    switch (kind) {
      case FeatureKind::Cens:
        agg = aggregate(cens(chroma_ref(), cfg_.cens_smooth, cfg_.cens_downsample));
        break;
      case FeatureKind::Tonnetz:
        agg = aggregate(tonnetz(chroma_ref()));
        break;
      case FeatureKind::Chroma:
        agg = aggregate(chroma_ref());
        break;
      default:
        agg = aggregate(extract(resampled, kind));
        break;
    }
    fv.layout.push_back({kind, fv.values.size(), agg.size()});
    fv.values.insert(fv.values.end(), agg.begin(), agg.end());
  }
  return fv;
}

FeatureVector feature_vector(const AudioClip& clip, std::span<const FeatureKind> kinds, const ExtractorConfig& cfg) {
  return Extractor(cfg).vector(clip, kinds);
}

void write_feature_file(const std::filesystem::path& path, const std::vector<std::string>& ids, const Mat& vectors,
                        const std::vector<FeatureVector::Segment>& layout) {
  if (ids.size() != vectors.rows) throw FeatureError("write_feature_file: id/vector count mismatch");

  std::ostringstream out;
  char num[40];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t';
    const double* row = vectors.row(i);
    for (std::size_t j = 0; j < vectors.cols; ++j) {
      std::snprintf(num, sizeof(num), "%.17g", row[j]);
      if (j) out << ',';
      out << num;
    }
    out << '\n';
  }

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FeatureError("write_feature_file: cannot open " + path.string());
  f << out.str();

  nlohmann::json meta;
  meta["dim"] = vectors.cols;
  meta["layout"] = nlohmann::json::array();
  for (const auto& seg : layout)
    meta["layout"].push_back({{"kind", kind_name(seg.kind)}, {"offset", seg.offset}, {"length", seg.length}});
  std::ofstream side(path.string() + ".layout.json", std::ios::trunc);
  side << meta.dump(2) << '\n';
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw FeatureError("read_feature_file: cannot open " + path.string());

  FeatureFile ff;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::size_t sep = line.find('\t');
    if (sep == std::string::npos) throw FeatureError("read_feature_file: malformed line");
    ff.ids.push_back(line.substr(0, sep));
    std::vector<double> vals;
    std::stringstream ss(line.substr(sep + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw FeatureError("read_feature_file: empty file");

  ff.vectors = Mat(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != ff.vectors.cols) throw FeatureError("read_feature_file: ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), ff.vectors.row(i));
  }

  std::ifstream side(path.string() + ".layout.json");
  if (side) {
    nlohmann::json meta = nlohmann::json::parse(side);
    for (const auto& seg : meta["layout"]) {
      auto k = kind_from_name(seg["kind"].get<std::string>());
      if (!k) throw FeatureError("read_feature_file: unknown kind in layout");
      ff.layout.push_back({*k, seg["offset"].get<std::size_t>(), seg["length"].get<std::size_t>()});
    }
  }
  return ff;
}

}  // namespace serkit
