#include "serkit/dsp.hpp"

#include <cmath>
#include <numbers>

#include "serkit/audio.hpp"

namespace serkit {

std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 0) throw EmptySignal("reflect_index: empty signal");
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n) - 2;
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - m);
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  return w;
}

Mat frame_signal(std::span<const double> samples, std::size_t n_fft, std::size_t hop) {
  if (samples.empty()) throw EmptySignal("frame_signal: empty signal");
  if (n_fft < 1 || hop < 1) throw DspError("frame_signal: n_fft and hop must be >= 1");

  const std::size_t n = samples.size();
  const std::size_t n_frames = 1 + n / hop;
  const long long pad = static_cast<long long>(n_fft / 2);

  Mat frames(n_frames, n_fft);
  for (std::size_t t = 0; t < n_frames; ++t) {
    double* dst = frames.row(t);
    const long long start = static_cast<long long>(t * hop) - pad;
    for (std::size_t j = 0; j < n_fft; ++j)
      dst[j] = samples[reflect_index(start + static_cast<long long>(j), n)];
  }
  return frames;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw NotPowerOfTwo("FftPlan: size must be a power of two");
  bitrev_.resize(n);
  std::size_t log2n = 0;
  while ((std::size_t{1} << log2n) < n) ++log2n;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < log2n; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    twiddle_[j] = {std::cos(ang), std::sin(ang)};
  }
  work_.resize(n);
}

void FftPlan::transform(std::span<const double> frame, std::vector<std::complex<double>>& out) const {
  if (frame.size() != n_) throw DspError("FftPlan: frame length does not match plan size");
  auto& a = work_;
  for (std::size_t i = 0; i < n_; ++i) a[bitrev_[i]] = frame[i];

  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t stride = n_ / len;
    const std::size_t half = len / 2;
    for (std::size_t base = 0; base < n_; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> w = twiddle_[j * stride];
        const std::complex<double> u = a[base + j];
        const std::complex<double> t = w * a[base + j + half];
        a[base + j] = u + t;
        a[base + j + half] = u - t;
      }
    }
  }
  out.assign(a.begin(), a.begin() + static_cast<long>(n_ / 2 + 1));
}

std::vector<std::complex<double>> fft_real(std::span<const double> frame) {
  FftPlan plan(frame.size());
  std::vector<std::complex<double>> out;
  plan.transform(frame, out);
  return out;
}

PowerSpectrogram power_spectrogram(const AudioClip& clip, const SpectrogramParams& params) {
  if (clip.samples.empty()) throw EmptySignal("power_spectrogram: empty clip");
  if (!is_power_of_two(params.n_fft)) throw NotPowerOfTwo("power_spectrogram: n_fft must be a power of two");

  const std::size_t n_fft = params.n_fft;
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = 1 + n / params.hop;
  const long long pad = static_cast<long long>(n_fft / 2);

  const std::vector<double> win = hann_window(n_fft);
  FftPlan plan(n_fft);

  PowerSpectrogram ps;
  ps.bins = Mat(n_bins, n_frames);
  ps.bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(n_fft);
  ps.params = params;

  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> spec;
  for (std::size_t t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t * params.hop) - pad;
    for (std::size_t j = 0; j < n_fft; ++j)
      frame[j] = win[j] * clip.samples[reflect_index(start + static_cast<long long>(j), n)];
    plan.transform(frame, spec);
    for (std::size_t k = 0; k < n_bins; ++k) ps.bins(k, t) = std::norm(spec[k]);
  }
  return ps;
}

std::vector<double> dct_ii_orthonormal(std::span<const double> v, std::size_t n_out) {
  const std::size_t n = v.size();
  if (n == 0 || n_out < 1 || n_out > n) throw DspError("dct_ii_orthonormal: need 1 <= n_out <= n");

  const double a0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ak = std::sqrt(2.0 / static_cast<double>(n));
  std::vector<double> c(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    const double f = std::numbers::pi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) acc += v[j] * std::cos(f * (2.0 * static_cast<double>(j) + 1.0));
    c[k] = (k == 0 ? a0 : ak) * acc;
  }
  return c;
}

}  // namespace serkit
