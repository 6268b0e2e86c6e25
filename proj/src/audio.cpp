#include "serkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

namespace serkit {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct Reader {
  const std::vector<unsigned char>& buf;
  std::size_t pos = 0;

  bool has(std::size_t n) const { return pos + n <= buf.size(); }

  std::uint16_t u16() {
    if (!has(2)) throw MalformedContainer("wav: truncated file");
    std::uint16_t x = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return x;
  }

  std::uint32_t u32() {
    if (!has(4)) throw MalformedContainer("wav: truncated file");
    std::uint32_t x = static_cast<std::uint32_t>(buf[pos]) | (static_cast<std::uint32_t>(buf[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(buf[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf[pos + 3]) << 24);
    pos += 4;
    return x;
  }

  std::uint32_t fourcc() { return u32(); }
};

constexpr std::uint32_t tag(char a, char b, char c, char d) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(a)) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(d)) << 24);
}

struct FmtInfo {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

FmtInfo parse_fmt(Reader& r, std::uint32_t chunk_size) {
  if (chunk_size < 16) throw MalformedContainer("wav: fmt chunk too small");
  const std::size_t end = r.pos + chunk_size;
  FmtInfo f;
  f.format = r.u16();
  f.channels = r.u16();
  f.sample_rate = r.u32();
  r.u32();  // byte rate
  r.u16();  // block align
  f.bits = r.u16();
  if (f.format == kFormatExtensible) {
    if (chunk_size < 40) throw MalformedContainer("wav: extensible fmt chunk too small");
    r.u16();  // cbSize
    r.u16();  // valid bits
    r.u32();  // channel mask
    // first two bytes of the sub-format GUID carry the format code
    f.format = r.u16();
  }
  r.pos = end;
  return f;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedContainer("wav: cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{buf};
  if (r.fourcc() != tag('R', 'I', 'F', 'F')) throw MalformedContainer("wav: missing RIFF magic");
  r.u32();  // riff size, unreliable in the wild; chunk sizes are validated below
  if (r.fourcc() != tag('W', 'A', 'V', 'E')) throw MalformedContainer("wav: missing WAVE magic");

  bool have_fmt = false;
  FmtInfo fmt;
  std::size_t data_pos = 0, data_size = 0;
  bool have_data = false;

  while (r.has(8)) {
    const std::uint32_t id = r.fourcc();
    const std::uint32_t size = r.u32();
    if (!r.has(size)) throw MalformedContainer("wav: chunk size exceeds file");
    if (id == tag('f', 'm', 't', ' ')) {
      fmt = parse_fmt(r, size);
      have_fmt = true;
    } else if (id == tag('d', 'a', 't', 'a')) {
      data_pos = r.pos;
      data_size = size;
      have_data = true;
      r.pos += size;
    } else {
      r.pos += size;  // unknown chunk
    }
    if (size % 2 == 1 && r.has(1)) r.pos += 1;  // chunks are word-aligned
  }

  if (!have_fmt) throw MalformedContainer("wav: missing fmt chunk");
  if (!have_data) throw MalformedContainer("wav: missing data chunk");
  if (fmt.sample_rate == 0) throw MalformedContainer("wav: zero sample rate");
  if (fmt.channels != 1 && fmt.channels != 2)
    throw UnsupportedEncoding("wav: only mono or stereo supported, got " + std::to_string(fmt.channels));

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatIeeeFloat && fmt.bits == 32;
  if (!pcm16 && !float32)
    throw UnsupportedEncoding("wav: format code " + std::to_string(fmt.format) + " with " +
                              std::to_string(fmt.bits) + " bits not supported");

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t n_frames = data_size / frame_bytes;
  if (n_frames == 0) throw EmptyAudio("wav: no audio frames in " + path.string());

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.source_path = path.string();
  clip.samples.resize(n_frames);

  const unsigned char* d = buf.data() + data_pos;
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t ch = 0; ch < fmt.channels; ++ch) {
      const unsigned char* p = d + i * frame_bytes + ch * bytes_per_sample;
      if (pcm16) {
        std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += static_cast<double>(s) / 32768.0;
      } else {
        std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        float s;
        std::memcpy(&s, &bits, 4);
        acc += std::clamp(static_cast<double>(s), -1.0, 1.0);
      }
    }
    clip.samples[i] = acc / fmt.channels;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.samples.empty()) throw EmptyAudio("write_wav: empty clip");
  if (clip.sample_rate <= 0) throw AudioError("write_wav: invalid sample rate");

  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_size = n * 2;
  std::vector<unsigned char> out;
  out.reserve(44 + data_size);

  auto put16 = [&out](std::uint16_t x) {
    out.push_back(static_cast<unsigned char>(x & 0xFF));
    out.push_back(static_cast<unsigned char>(x >> 8));
  };
  auto put32 = [&out](std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((x >> (8 * i)) & 0xFF));
  };
  auto puttag = [&out](const char* t) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(t[i]));
  };

  puttag("RIFF");
  put32(36 + data_size);
  puttag("WAVE");
  puttag("fmt ");
  put32(16);
  put16(kFormatPcm);
  put16(1);  // mono
  put32(static_cast<std::uint32_t>(clip.sample_rate));
  put32(static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(2);   // block align
  put16(16);  // bits
  puttag("data");
  put32(data_size);
  for (double s : clip.samples) {
    long q = std::lrint(std::clamp(s, -1.0, 1.0) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw AudioError("write_wav: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw AudioError("write_wav: short write to " + path.string());
}

namespace {

constexpr int kTapsPerPhase = 32;
constexpr int kHalfWidth = kTapsPerPhase / 2;  // 16 input samples each side

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// One row of 32 taps per fractional phase; each row normalized to unit
/// sum so that DC passes through exactly.
std::vector<double> build_phase_table(std::size_t n_phases, double cutoff) {
  std::vector<double> taps(n_phases * kTapsPerPhase);
  for (std::size_t p = 0; p < n_phases; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(n_phases);
    double sum = 0.0;
    for (int j = 0; j < kTapsPerPhase; ++j) {
      // kernel argument: distance from output position to input sample
      const double t = frac + static_cast<double>(kHalfWidth - 1 - j);
      const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * t / kHalfWidth);
      taps[p * kTapsPerPhase + j] = cutoff * sinc(cutoff * t) * w;
      sum += taps[p * kTapsPerPhase + j];
    }
    for (int j = 0; j < kTapsPerPhase; ++j) taps[p * kTapsPerPhase + j] /= sum;
  }
  return taps;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_sr) {
  if (target_sr <= 0) throw AudioError("resample: target rate must be positive");
  if (clip.sample_rate <= 0) throw AudioError("resample: clip has invalid sample rate");
  if (target_sr == clip.sample_rate) return clip;
  if (clip.samples.empty()) throw EmptyAudio("resample: empty clip");

  const long long g = std::gcd<long long>(clip.sample_rate, target_sr);
  const long long up = target_sr / g;    // L
  const long long down = clip.sample_rate / g;  // M

  const double cutoff = std::min(1.0, static_cast<double>(target_sr) / clip.sample_rate);
  const std::vector<double> taps = build_phase_table(static_cast<std::size_t>(up), cutoff);

  const long long n_in = static_cast<long long>(clip.samples.size());
  const long long n_out = (n_in * up + down - 1) / down;

  AudioClip out;
  out.sample_rate = target_sr;
  out.source_path = clip.source_path;
  out.samples.resize(static_cast<std::size_t>(n_out));

  const double* x = clip.samples.data();
  for (long long n = 0; n < n_out; ++n) {
    const long long num = n * down;
    const long long q = num / up;
    const long long phase = num % up;
    const double* h = taps.data() + phase * kTapsPerPhase;
    const long long first = q - (kHalfWidth - 1);

    double acc = 0.0;
    if (first >= 0 && first + kTapsPerPhase <= n_in) {
      const double* xs = x + first;
      for (int j = 0; j < kTapsPerPhase; ++j) acc += h[j] * xs[j];
    } else {
      for (int j = 0; j < kTapsPerPhase; ++j) {
        const long long k = first + j;
        if (k >= 0 && k < n_in) acc += h[j] * x[k];
      }
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

double mean_abs_amplitude(const AudioClip& clip) {
  if (clip.samples.empty()) throw EmptyAudio("mean_abs_amplitude: empty clip");
  double acc = 0.0;
  for (double s : clip.samples) acc += std::abs(s);
  return acc / static_cast<double>(clip.samples.size());
}

}  // namespace serkit
