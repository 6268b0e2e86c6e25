#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "serkit/features.hpp"

using namespace serkit;

namespace {

AudioClip sine_clip(double freq, int sr, double seconds, double amp = 1.0) {
  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / sr);
  return clip;
}

AudioClip noisy_clip(std::uint64_t seed, int sr, double seconds) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.3, 0.3);
  std::uniform_real_distribution<double> freq(60.0, sr / 2.5);
  const double f1 = freq(rng), f2 = freq(rng);
  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    clip.samples[i] = 0.4 * std::sin(2.0 * std::numbers::pi * f1 * t) +
                      0.25 * std::sin(2.0 * std::numbers::pi * f2 * t + 1.3) + noise(rng);
  }
  return clip;
}

// ---- independent naive pipeline: framing, Hann, DFT, power, mel, DCT ----

std::size_t bounce(long long i, std::size_t n) {
  if (n == 1) return 0;
  long long j = i;
  while (j < 0 || j >= static_cast<long long>(n)) {
    if (j < 0) j = -j;
    if (j >= static_cast<long long>(n)) j = 2 * (static_cast<long long>(n) - 1) - j;
  }
  return static_cast<std::size_t>(j);
}

std::vector<std::vector<double>> naive_power_spec(const AudioClip& clip, std::size_t n_fft, std::size_t hop) {
  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = 1 + n / hop;
  const std::size_t n_bins = n_fft / 2 + 1;
  std::vector<std::vector<double>> out(n_bins, std::vector<double>(n_frames, 0.0));
  for (std::size_t t = 0; t < n_frames; ++t) {
    std::vector<double> frame(n_fft);
    for (std::size_t j = 0; j < n_fft; ++j) {
      const long long idx = static_cast<long long>(t * hop) + static_cast<long long>(j) -
                            static_cast<long long>(n_fft / 2);
      const double w =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_fft));
      frame[j] = w * clip.samples[bounce(idx, n)];
    }
    for (std::size_t k = 0; k < n_bins; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = 0; j < n_fft; ++j) {
        const double ang =
            -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n_fft);
        acc += frame[j] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      out[k][t] = std::norm(acc);
    }
  }
  return out;
}

std::vector<std::vector<double>> naive_mel_weights(std::size_t n_mels, std::size_t n_fft, int sr, double fmin,
                                                   double fmax) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> corners(n_mels + 2);
  for (std::size_t i = 0; i < corners.size(); ++i)
    corners[i] = inv(mel(fmin) + (mel(fmax) - mel(fmin)) * static_cast<double>(i) /
                                     static_cast<double>(n_mels + 1));
  std::vector<std::vector<double>> w(n_mels, std::vector<double>(n_fft / 2 + 1, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m)
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      const double f = static_cast<double>(k) * sr / static_cast<double>(n_fft);
      if (f <= corners[m] || f >= corners[m + 2]) continue;
      w[m][k] = f <= corners[m + 1] ? (f - corners[m]) / (corners[m + 1] - corners[m])
                                    : (corners[m + 2] - f) / (corners[m + 2] - corners[m + 1]);
    }
  return w;
}

std::vector<std::vector<double>> naive_melspec(const AudioClip& clip, std::size_t n_fft, std::size_t hop,
                                               std::size_t n_mels) {
  const auto ps = naive_power_spec(clip, n_fft, hop);
  const auto w = naive_mel_weights(n_mels, n_fft, clip.sample_rate, 0.0, clip.sample_rate / 2.0);
  const std::size_t n_frames = ps[0].size();
  std::vector<std::vector<double>> out(n_mels, std::vector<double>(n_frames, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m)
    for (std::size_t t = 0; t < n_frames; ++t)
      for (std::size_t k = 0; k < ps.size(); ++k) out[m][t] += w[m][k] * ps[k][t];
  return out;
}

std::vector<std::vector<double>> naive_mfcc(const AudioClip& clip, std::size_t n_fft, std::size_t hop,
                                            std::size_t n_mels, std::size_t n_mfcc) {
  const auto mel = naive_melspec(clip, n_fft, hop, n_mels);
  const std::size_t n_frames = mel[0].size();
  std::vector<std::vector<double>> out(n_mfcc, std::vector<double>(n_frames, 0.0));
  for (std::size_t t = 0; t < n_frames; ++t) {
    std::vector<double> logmel(n_mels);
    for (std::size_t m = 0; m < n_mels; ++m) logmel[m] = 10.0 * std::log10(std::max(mel[m][t], 1e-10));
    for (std::size_t k = 0; k < n_mfcc; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n_mels; ++j)
        acc += logmel[j] * std::cos(std::numbers::pi * static_cast<double>(k) *
                                    (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(n_mels)));
      out[k][t] = (k == 0 ? std::sqrt(1.0 / static_cast<double>(n_mels))
                          : std::sqrt(2.0 / static_cast<double>(n_mels))) *
                  acc;
    }
  }
  return out;
}

std::vector<std::vector<double>> naive_contrast(const AudioClip& clip, std::size_t n_fft, std::size_t hop,
                                                double fmin, std::size_t n_bands, double alpha) {
  const auto ps = naive_power_spec(clip, n_fft, hop);
  const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(n_fft);
  const std::size_t n_frames = ps[0].size();
  std::vector<std::vector<double>> out(n_bands + 1, std::vector<double>(n_frames, 0.0));

  std::size_t lo = 0;
  for (std::size_t b = 0; b <= n_bands; ++b) {
    std::size_t hi = ps.size();
    if (b < n_bands) {
      const double edge = fmin * std::pow(2.0, static_cast<double>(b));
      hi = lo;
      while (hi < ps.size() && static_cast<double>(hi) * bin_hz < edge) ++hi;
    }
    const std::size_t m = hi - lo;
    if (m > 0) {
      const std::size_t cnt =
          std::min<std::size_t>(m, static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m))));
      for (std::size_t t = 0; t < n_frames; ++t) {
        std::vector<double> vals;
        for (std::size_t k = lo; k < hi; ++k) vals.push_back(ps[k][t]);
        std::sort(vals.begin(), vals.end());
        double valley = 0.0, peak = 0.0;
        for (std::size_t c = 0; c < cnt; ++c) {
          valley += vals[c];
          peak += vals[m - 1 - c];
        }
        out[b][t] = 10.0 * std::log10(std::max(peak / static_cast<double>(cnt), 1e-10)) -
                    10.0 * std::log10(std::max(valley / static_cast<double>(cnt), 1e-10));
      }
    }
    lo = hi;
  }
  return out;
}

FeatureMatrix make_chroma(const Mat& values) { return FeatureMatrix{FeatureKind::Chroma, values}; }

}  // namespace

TEST_CASE("mel filterbank geometry") {
  const MelFilterbank bank = mel_filterbank(128, 2048, 22050, 0.0, 11025.0);
  CHECK(bank.weights.rows == 128);
  CHECK(bank.weights.cols == 1025);
  CHECK(bank.centers_hz.size() == 128);

  // per-row argmax frequencies strictly increase
  double prev = -1.0;
  for (std::size_t m = 0; m < 128; ++m) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < 1025; ++k)
      if (bank.weights(m, k) > bank.weights(m, arg)) arg = k;
    const double f = static_cast<double>(arg) * 22050.0 / 2048.0;
    CHECK(f > prev);
    prev = f;
  }

  // every bin strictly inside (fmin, fmax) is covered
  for (std::size_t k = 0; k < 1025; ++k) {
    const double f = static_cast<double>(k) * 22050.0 / 2048.0;
    if (f <= 0.0 || f >= 11025.0) continue;
    double total = 0.0;
    for (std::size_t m = 0; m < 128; ++m) total += bank.weights(m, k);
    CHECK(total > 0.0);
  }

  // single contiguous support per row
  for (std::size_t m = 0; m < 128; ++m) {
    bool seen = false, ended = false;
    for (std::size_t k = 0; k < 1025; ++k) {
      const bool nz = bank.weights(m, k) > 0.0;
      if (nz) {
        CHECK(!ended);
        seen = true;
      } else if (seen) {
        ended = true;
      }
    }
    CHECK(seen);
  }

  CHECK_THROWS_AS(mel_filterbank(128, 2048, 22050, 5000.0, 4000.0), InvalidRange);
}

TEST_CASE("melspectrogram zero clip and tone band") {
  AudioClip zero;
  zero.sample_rate = 22050;
  zero.samples.assign(11025, 0.0);
  const MelFilterbank bank = mel_filterbank(128, 2048, 22050, 0.0, 11025.0);
  const FeatureMatrix mz = melspectrogram(zero, {2048, 512}, bank);
  CHECK(mz.values.rows == 128);
  for (double v : mz.values.v) CHECK(v == 0.0);

  const AudioClip tone = sine_clip(440.0, 22050, 0.5);
  const FeatureMatrix mt = melspectrogram(tone, {2048, 512}, bank);
  // per-frame argmax lands on the band whose center is nearest 440 Hz
  double best = 1e9;
  for (double c : bank.centers_hz) best = std::min(best, std::abs(c - 440.0));
  for (std::size_t t = 1; t + 1 < mt.values.cols; ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < 128; ++m)
      if (mt.values(m, t) > mt.values(arg, t)) arg = m;
    CHECK(std::abs(bank.centers_hz[arg] - 440.0) <= best + 26.0);
  }
}

TEST_CASE("melspectrogram matches naive summation oracle") {
  const AudioClip clip = noisy_clip(7, 22050, 0.25);
  const MelFilterbank bank = mel_filterbank(40, 512, 22050, 0.0, 11025.0);
  const FeatureMatrix fast = melspectrogram(clip, {512, 256}, bank);
  const auto slow = naive_melspec(clip, 512, 256, 40);
  double max_rel = 0.0;
  for (std::size_t m = 0; m < 40; ++m)
    for (std::size_t t = 0; t < fast.values.cols; ++t) {
      const double denom = std::max(1e-12, std::abs(slow[m][t]));
      max_rel = std::max(max_rel, std::abs(fast.values(m, t) - slow[m][t]) / denom);
    }
  CHECK(max_rel < 1e-9);
}

TEST_CASE("mfcc of zero clip is the constant-vector DCT") {
  AudioClip zero;
  zero.sample_rate = 22050;
  zero.samples.assign(11025, 0.0);
  const MelFilterbank bank = mel_filterbank(128, 2048, 22050, 0.0, 11025.0);
  const FeatureMatrix m = mfcc(zero, {2048, 512}, bank, 20);
  CHECK(m.values.rows == 20);
  const double expected_c0 = std::sqrt(1.0 / 128.0) * 128.0 * 10.0 * std::log10(1e-10);
  for (std::size_t t = 0; t < m.values.cols; ++t) {
    CHECK(m.values(0, t) == doctest::Approx(expected_c0).epsilon(1e-12));
    for (std::size_t k = 1; k < 20; ++k) CHECK(std::abs(m.values(k, t)) < 1e-9);
  }
}

TEST_CASE("mfcc end-to-end matches naive pipeline oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AudioClip clip = noisy_clip(1000 + seed, 22050, 0.2);
    const MelFilterbank bank = mel_filterbank(40, 512, 22050, 0.0, 11025.0);
    const FeatureMatrix fast = mfcc(clip, {512, 256}, bank, 13);
    const auto slow = naive_mfcc(clip, 512, 256, 40, 13);
    for (std::size_t k = 0; k < 13; ++k)
      for (std::size_t t = 0; t < fast.values.cols; ++t)
        CHECK(fast.values(k, t) == doctest::Approx(slow[k][t]).epsilon(1e-6));
  }
  // one clip at the full default geometry
  const AudioClip clip = sine_clip(440.0, 22050, 0.3);
  const MelFilterbank bank = mel_filterbank(128, 2048, 22050, 0.0, 11025.0);
  const FeatureMatrix fast = mfcc(clip, {2048, 512}, bank, 20);
  const auto slow = naive_mfcc(clip, 2048, 512, 128, 20);
  for (std::size_t k = 0; k < 20; ++k)
    for (std::size_t t = 0; t < fast.values.cols; ++t)
      CHECK(fast.values(k, t) == doctest::Approx(slow[k][t]).epsilon(1e-6));
}

TEST_CASE("mfcc basis injection lights a single coefficient") {
  // log-mel proportional to the DCT basis at index 2 -> only c[2] fires
  const std::size_t n_mels = 128;
  std::vector<double> logmel(n_mels);
  for (std::size_t j = 0; j < n_mels; ++j)
    logmel[j] = std::cos(std::numbers::pi * 2.0 * (2.0 * static_cast<double>(j) + 1.0) /
                         (2.0 * static_cast<double>(n_mels)));
  const auto c = dct_ii_orthonormal(logmel, 20);
  for (std::size_t k = 0; k < 20; ++k)
    if (k != 2) CHECK(std::abs(c[k]) < 1e-10);
  CHECK(std::abs(c[2]) > 1.0);
}

TEST_CASE("zcr analytic cases") {
  AudioClip flat;
  flat.sample_rate = 22050;
  flat.samples.assign(8000, 0.4);
  const FeatureMatrix fz = zcr(flat, 2048, 512);
  CHECK(fz.values.rows == 1);
  for (double v : fz.values.v) CHECK(v == 0.0);

  AudioClip alt;
  alt.sample_rate = 22050;
  alt.samples.resize(8192);
  for (std::size_t i = 0; i < alt.samples.size(); ++i) alt.samples[i] = i % 2 ? -1.0 : 1.0;
  const FeatureMatrix fa = zcr(alt, 2048, 512);
  for (std::size_t t = 2; t + 2 < fa.values.cols; ++t) CHECK(fa.values(0, t) == doctest::Approx(1.0));

  const AudioClip sine = sine_clip(1000.0, 22050, 1.0);
  const FeatureMatrix fs = zcr(sine, 2048, 512);
  for (std::size_t t = 2; t + 2 < fs.values.cols; ++t)
    CHECK(std::abs(fs.values(0, t) - 2.0 * 1000.0 / 22050.0) < 0.005);
}

TEST_CASE("chroma pitch classes for tones") {
  auto frame_argmax = [](const FeatureMatrix& ch, std::size_t t) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < 12; ++c)
      if (ch.values(c, t) > ch.values(arg, t)) arg = c;
    return arg;
  };

  const FeatureMatrix ca = chromagram(sine_clip(440.0, 22050, 0.4), {2048, 512});
  CHECK(ca.values.rows == 12);
  for (std::size_t t = 1; t + 1 < ca.values.cols; ++t) CHECK(frame_argmax(ca, t) == 9);  // A

  const FeatureMatrix cc = chromagram(sine_clip(261.63, 22050, 0.4), {2048, 512});
  for (std::size_t t = 1; t + 1 < cc.values.cols; ++t) CHECK(frame_argmax(cc, t) == 0);  // C

  // octave equivalence: 220 and 440 share the argmax
  const FeatureMatrix c3 = chromagram(sine_clip(220.0, 22050, 0.4), {2048, 512});
  for (std::size_t t = 1; t + 1 < c3.values.cols; ++t) CHECK(frame_argmax(c3, t) == 9);

  // all 12 semitones across 3 octaves (C4..B6; below ~180 Hz the FFT bin
  // spacing at 2048/22050 exceeds a semitone and the mapping aliases)
  for (int midi = 60; midi < 96; ++midi) {
    const double freq = 440.0 * std::pow(2.0, (midi - 69) / 12.0);
    const FeatureMatrix ch = chromagram(sine_clip(freq, 22050, 0.25), {2048, 512});
    CHECK(frame_argmax(ch, ch.values.cols / 2) == static_cast<std::size_t>(midi % 12));
  }
}

TEST_CASE("cens quantization and normalization") {
  Mat uniform(12, 50, 1.0 / 12.0);
  const FeatureMatrix cu = cens(make_chroma(uniform));
  CHECK(cu.values.rows == 12);
  for (std::size_t t = 0; t < cu.values.cols; ++t)
    for (std::size_t c = 0; c < 12; ++c)
      CHECK(cu.values(c, t) == doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(1e-9));

  Mat zero(12, 30, 0.0);
  const FeatureMatrix cz = cens(make_chroma(zero));
  for (double v : cz.values.v) CHECK(v == 0.0);

  // single-class chroma -> one-hot output at that class
  Mat single(12, 50, 0.0);
  for (std::size_t t = 0; t < 50; ++t) single(5, t) = 0.7;
  const FeatureMatrix cs = cens(make_chroma(single));
  for (std::size_t t = 0; t < cs.values.cols; ++t)
    for (std::size_t c = 0; c < 12; ++c)
      CHECK(cs.values(c, t) == doctest::Approx(c == 5 ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("spectral contrast bands") {
  const AudioClip tone = sine_clip(1000.0, 22050, 0.5);
  const FeatureMatrix ct = spectral_contrast(tone, {2048, 512});
  CHECK(ct.values.rows == 7);  // n_bands + 1

  // octave edges 200*2^b put 1 kHz in row 3 ([800, 1600))
  double tone_band_min = 1e9;
  for (std::size_t t = 1; t + 1 < ct.values.cols; ++t) tone_band_min = std::min(tone_band_min, ct.values(3, t));
  CHECK(tone_band_min > 30.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  AudioClip noise;
  noise.sample_rate = 22050;
  noise.samples.resize(22050 * 5 / 2);  // ~100 frames
  for (double& s : noise.samples) s = dist(rng);
  const FeatureMatrix cn = spectral_contrast(noise, {2048, 512});
  for (std::size_t b = 0; b < 7; ++b) {
    double mean = 0.0;
    for (std::size_t t = 0; t < cn.values.cols; ++t) mean += cn.values(b, t);
    mean /= static_cast<double>(cn.values.cols);
    CHECK(mean < tone_band_min);
  }

  AudioClip low;
  low.sample_rate = 2000;  // octave bands cannot fit below a 1 kHz Nyquist
  low.samples.assign(2000, 0.1);
  CHECK_THROWS_AS(spectral_contrast(low, {512, 128}), BandOutOfRange);
}

TEST_CASE("spectral contrast matches naive oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AudioClip clip = noisy_clip(2000 + seed, 22050, 0.2);
    const FeatureMatrix fast = spectral_contrast(clip, {512, 256});
    const auto slow = naive_contrast(clip, 512, 256, 200.0, 6, 0.02);
    for (std::size_t b = 0; b < 7; ++b)
      for (std::size_t t = 0; t < fast.values.cols; ++t)
        CHECK(fast.values(b, t) == doctest::Approx(slow[b][t]).epsilon(1e-6));
  }
}

TEST_CASE("tonnetz analytic cases") {
  Mat uniform(12, 20, 1.0 / 12.0);
  const FeatureMatrix tu = tonnetz(make_chroma(uniform));
  CHECK(tu.values.rows == 6);
  for (double v : tu.values.v) CHECK(std::abs(v) < 1e-10);

  Mat onehot(12, 5, 0.0);
  for (std::size_t t = 0; t < 5; ++t) onehot(0, t) = 0.3;
  const FeatureMatrix th = tonnetz(make_chroma(onehot));
  const double expected[6] = {0.0, 1.0, 0.0, 1.0, 0.0, 0.5};
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t d = 0; d < 6; ++d)
      CHECK(th.values(d, t) == doctest::Approx(expected[d]).epsilon(1e-12));

  Mat zero(12, 4, 0.0);
  const FeatureMatrix tz = tonnetz(make_chroma(zero));
  for (double v : tz.values.v) CHECK(v == 0.0);
}

TEST_CASE("stft feature is the magnitude spectrogram") {
  AudioClip zero;
  zero.sample_rate = 22050;
  zero.samples.assign(8000, 0.0);
  const FeatureMatrix sz = stft_feature(zero, {2048, 512});
  CHECK(sz.values.rows == 1025);
  for (double v : sz.values.v) CHECK(v == 0.0);

  const AudioClip tone = sine_clip(1000.0, 22050, 0.4);
  const FeatureMatrix mag = stft_feature(tone, {2048, 512});
  const PowerSpectrogram power = power_spectrogram(tone, {2048, 512});
  double max_err = 0.0;
  for (std::size_t i = 0; i < mag.values.v.size(); ++i)
    max_err = std::max(max_err, std::abs(mag.values.v[i] * mag.values.v[i] - power.bins.v[i]));
  CHECK(max_err < 1e-9);
  for (std::size_t t = 1; t + 1 < mag.values.cols; ++t) {
    std::size_t arg = 1;
    for (std::size_t k = 1; k < 1025; ++k)
      if (mag.values(k, t) > mag.values(arg, t)) arg = k;
    CHECK(arg == 93);
  }
}

TEST_CASE("aggregate is the frame mean") {
  Mat m(2, 2);
  m(0, 0) = 1.0;
  m(0, 1) = 3.0;
  m(1, 0) = -2.0;
  m(1, 1) = 2.0;
  const auto agg = aggregate(FeatureMatrix{FeatureKind::Melspec, m});
  CHECK(agg[0] == doctest::Approx(2.0));
  CHECK(agg[1] == doctest::Approx(0.0));

  Mat single(3, 1);
  single(0, 0) = 5.0;
  single(1, 0) = -1.0;
  single(2, 0) = 0.25;
  const auto one = aggregate(FeatureMatrix{FeatureKind::Mfcc, single});
  CHECK(one == std::vector<double>{5.0, -1.0, 0.25});

  Mat swapped(2, 2);  // frames permuted
  swapped(0, 0) = 3.0;
  swapped(0, 1) = 1.0;
  swapped(1, 0) = 2.0;
  swapped(1, 1) = -2.0;
  const auto agg2 = aggregate(FeatureMatrix{FeatureKind::Melspec, swapped});
  CHECK(agg2[0] == doctest::Approx(agg[0]));
  CHECK(agg2[1] == doctest::Approx(agg[1]));
}

TEST_CASE("combined feature vector dimensions") {
  const AudioClip clip = noisy_clip(5, 22050, 0.4);
  const Extractor extractor;

  const std::vector<FeatureKind> combined{FeatureKind::Mfcc, FeatureKind::Melspec, FeatureKind::Contrast};
  const FeatureVector fv = extractor.vector(clip, combined);
  CHECK(fv.values.size() == 155);  // 20 + 128 + 7
  REQUIRE(fv.layout.size() == 3);
  CHECK(fv.layout[0].length == 20);
  CHECK(fv.layout[1].offset == 20);
  CHECK(fv.layout[1].length == 128);
  CHECK(fv.layout[2].offset == 148);
  CHECK(fv.layout[2].length == 7);

  const std::vector<FeatureKind> zcr_only{FeatureKind::Zcr};
  CHECK(extractor.vector(clip, zcr_only).values.size() == 1);

  const std::vector<FeatureKind> with_stft{FeatureKind::Mfcc, FeatureKind::Stft, FeatureKind::Contrast};
  CHECK(extractor.vector(clip, with_stft).values.size() == 1052);  // 20 + 1025 + 7

  CHECK_THROWS_AS(extractor.vector(clip, std::vector<FeatureKind>{}), FeatureError);
  const std::vector<FeatureKind> dupes{FeatureKind::Zcr, FeatureKind::Zcr};
  CHECK_THROWS_AS(extractor.vector(clip, dupes), FeatureError);
}

TEST_CASE("feature dimension table holds for every kind") {
  const AudioClip clip = noisy_clip(31, 22050, 0.3);
  const Extractor extractor;
  const ExtractorConfig& cfg = extractor.config();
  const FeatureKind kinds[] = {FeatureKind::Mfcc,   FeatureKind::Melspec, FeatureKind::Contrast,
                               FeatureKind::Chroma, FeatureKind::Cens,    FeatureKind::Zcr,
                               FeatureKind::Tonnetz, FeatureKind::Stft};
  const std::size_t expected[] = {20, 128, 7, 12, 12, 1, 6, 1025};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(extractor.extract(clip, kinds[i]).values.rows == expected[i]);
    CHECK(feature_dim(kinds[i], cfg) == expected[i]);
  }
}

TEST_CASE("amplitude robustness of normalized features") {
  const AudioClip clip = noisy_clip(77, 22050, 0.3);
  AudioClip scaled = clip;
  for (double& s : scaled.samples) s *= 0.35;

  const FeatureMatrix c1 = chromagram(clip, {2048, 512});
  const FeatureMatrix c2 = chromagram(scaled, {2048, 512});
  for (std::size_t i = 0; i < c1.values.v.size(); ++i)
    CHECK(c1.values.v[i] == doctest::Approx(c2.values.v[i]).epsilon(1e-9));

  const FeatureMatrix e1 = cens(c1);
  const FeatureMatrix e2 = cens(c2);
  for (std::size_t i = 0; i < e1.values.v.size(); ++i)
    CHECK(e1.values.v[i] == doctest::Approx(e2.values.v[i]).epsilon(1e-9));

  const MelFilterbank bank = mel_filterbank(128, 2048, 22050, 0.0, 11025.0);
  const FeatureMatrix m1 = melspectrogram(clip, {2048, 512}, bank);
  const FeatureMatrix m2 = melspectrogram(scaled, {2048, 512}, bank);
  for (std::size_t i = 0; i < m1.values.v.size(); ++i)
    CHECK(m2.values.v[i] == doctest::Approx(0.35 * 0.35 * m1.values.v[i]).epsilon(1e-9));
}

TEST_CASE("feature extraction is deterministic") {
  const AudioClip clip = noisy_clip(123, 44100, 0.3);  // resampled inside the extractor
  const Extractor extractor;
  const std::vector<FeatureKind> kinds{FeatureKind::Mfcc, FeatureKind::Melspec, FeatureKind::Contrast};
  const FeatureVector a = extractor.vector(clip, kinds);
  const FeatureVector b = extractor.vector(clip, kinds);
  CHECK(a.values == b.values);  // bitwise
}

TEST_CASE("feature file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "serkit_feat_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "features.tsv";

  Mat vectors(2, 3);
  vectors(0, 0) = 1.5;
  vectors(0, 1) = -2.25;
  vectors(0, 2) = 1e-17;
  vectors(1, 0) = 0.0;
  vectors(1, 1) = 3.125;
  vectors(1, 2) = -7.5;
  const std::vector<FeatureVector::Segment> layout{{FeatureKind::Zcr, 0, 1}, {FeatureKind::Tonnetz, 1, 2}};
  write_feature_file(path, {"clip_a.wav", "clip_b.wav"}, vectors, layout);

  const FeatureFile ff = read_feature_file(path);
  CHECK(ff.ids == std::vector<std::string>{"clip_a.wav", "clip_b.wav"});
  REQUIRE(ff.vectors.rows == 2);
  REQUIRE(ff.vectors.cols == 3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ff.vectors.v[i] == vectors.v[i]);
  REQUIRE(ff.layout.size() == 2);
  CHECK(ff.layout[1].kind == FeatureKind::Tonnetz);
  CHECK(ff.layout[1].offset == 1);
  CHECK(ff.layout[1].length == 2);
}

TEST_CASE("kind names parse back") {
  const auto kinds = parse_kind_list("mfcc,mel,contrast");
  REQUIRE(kinds.size() == 3);
  CHECK(kinds[0] == FeatureKind::Mfcc);
  CHECK(kinds[1] == FeatureKind::Melspec);
  CHECK(kinds[2] == FeatureKind::Contrast);
  CHECK_THROWS_AS(parse_kind_list("mfcc,bogus"), FeatureError);
  CHECK_THROWS_AS(parse_kind_list("zcr,zcr"), FeatureError);
}
