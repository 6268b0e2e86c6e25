#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace serkit {

struct AudioClip;

class DspError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySignal : public DspError {
 public:
  using DspError::DspError;
};

class NotPowerOfTwo : public DspError {
 public:
  using DspError::DspError;
};

/// Dense row-major matrix of doubles. The workhorse container for
/// spectrograms, feature matrices and training data.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  bool empty() const { return v.empty(); }
};

struct SpectrogramParams {
  std::size_t n_fft = 2048;  // power of two
  std::size_t hop = 512;     // 0 < hop <= n_fft
};

struct PowerSpectrogram {
  Mat bins;  // (n_fft/2 + 1) x n_frames, entries >= 0
  double bin_hz = 0.0;
  SpectrogramParams params;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Signal index with reflection at both ends (no repeated edge sample),
/// defined for any integer offset.
std::size_t reflect_index(long long i, std::size_t n);

/// Periodic Hann window, w[k] = 0.5 - 0.5*cos(2*pi*k/n).
std::vector<double> hann_window(std::size_t n);

/// Center-padded framing: the signal is extended by n_fft/2 reflected
/// samples on each side and frame t covers padded indices
/// [t*hop, t*hop + n_fft). Returns n_frames x n_fft with
/// n_frames = 1 + floor(len/hop).
Mat frame_signal(std::span<const double> samples, std::size_t n_fft, std::size_t hop);

/// Radix-2 FFT for one fixed power-of-two size. Twiddle and bit-reversal
/// tables are built once and immutable afterwards.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }

  /// Forward DFT of a real frame; returns bins 0..n/2 with the
  /// convention X[k] = sum_t x[t]*exp(-2*pi*i*k*t/n).
  void transform(std::span<const double> frame, std::vector<std::complex<double>>& out) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2*pi*i*j/n), j in [0, n/2)
  mutable std::vector<std::complex<double>> work_;
};

/// One-shot real FFT; prefer FftPlan in loops.
std::vector<std::complex<double>> fft_real(std::span<const double> frame);

/// Windowed power spectrogram: per frame apply the periodic Hann window,
/// transform, and square magnitudes.
PowerSpectrogram power_spectrogram(const AudioClip& clip, const SpectrogramParams& params);

/// Orthonormal DCT-II: c[k] = a(k) * sum_j v[j]*cos(pi*k*(2j+1)/(2n)),
/// a(0) = sqrt(1/n), a(k>0) = sqrt(2/n). Returns the first n_out
/// coefficients.
std::vector<double> dct_ii_orthonormal(std::span<const double> v, std::size_t n_out);

}  // namespace serkit
