#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "serkit/audio.hpp"
#include "serkit/dsp.hpp"

using namespace serkit;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "serkit_audio_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void append16(std::vector<unsigned char>& b, std::uint16_t x) {
  b.push_back(static_cast<unsigned char>(x & 0xFF));
  b.push_back(static_cast<unsigned char>(x >> 8));
}

void append32(std::vector<unsigned char>& b, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((x >> (8 * i)) & 0xFF));
}

void append_tag(std::vector<unsigned char>& b, const char* t) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(t[i]));
}

std::vector<unsigned char> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                     std::uint16_t bits, const std::vector<unsigned char>& data) {
  std::vector<unsigned char> b;
  append_tag(b, "RIFF");
  append32(b, 36 + static_cast<std::uint32_t>(data.size()));
  append_tag(b, "WAVE");
  append_tag(b, "fmt ");
  append32(b, 16);
  append16(b, format);
  append16(b, channels);
  append32(b, rate);
  append32(b, rate * channels * bits / 8);
  append16(b, static_cast<std::uint16_t>(channels * bits / 8));
  append16(b, bits);
  append_tag(b, "data");
  append32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

std::filesystem::path write_bytes(const std::string& name, const std::vector<unsigned char>& bytes) {
  const auto path = temp_dir() / name;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return path;
}

AudioClip sine_clip(double freq, int sr, double seconds) {
  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / sr);
  return clip;
}

double dominant_freq(const AudioClip& clip) {
  std::size_t n = 1;
  while (n * 2 <= clip.samples.size() && n < 16384) n *= 2;
  std::vector<double> slice(clip.samples.begin(), clip.samples.begin() + static_cast<long>(n));
  const auto spec = fft_real(slice);
  std::size_t arg = 1;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[arg])) arg = k;
  return static_cast<double>(arg) * clip.sample_rate / static_cast<double>(n);
}

}  // namespace

TEST_CASE("16-bit mono decode normalizes by 32768") {
  std::vector<unsigned char> data;
  append16(data, 0x7FFF);  // +32767
  const auto path = write_bytes("max16.wav", wav_bytes(1, 1, 48000, 16, data));
  const AudioClip clip = load_wav(path);
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(clip.sample_rate == 48000);
}

TEST_CASE("stereo mixdown averages channels") {
  std::vector<unsigned char> data;
  append16(data, 0x4000);                                     // L = +0.5
  append16(data, static_cast<std::uint16_t>(-0x4000 & 0xFFFF));  // R = -0.5
  const auto path = write_bytes("stereo.wav", wav_bytes(1, 2, 44100, 16, data));
  const AudioClip clip = load_wav(path);
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == doctest::Approx(0.0));
}

TEST_CASE("float32 wav decodes and clamps") {
  std::vector<unsigned char> data;
  auto put_float = [&data](float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append32(data, bits);
  };
  put_float(0.25f);
  put_float(-1.5f);  // out of range, clamps to -1
  const auto path = write_bytes("f32.wav", wav_bytes(3, 1, 22050, 32, data));
  const AudioClip clip = load_wav(path);
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(0.25));
  CHECK(clip.samples[1] == doctest::Approx(-1.0));
}

TEST_CASE("malformed and unsupported containers are rejected") {
  CHECK_THROWS_AS(load_wav(write_bytes("bad_magic.wav", {'J', 'U', 'N', 'K', 0, 0, 0, 0})), MalformedContainer);

  std::vector<unsigned char> data;
  append16(data, 0);
  auto adpcm = wav_bytes(2, 1, 8000, 16, data);  // format 2 = ADPCM
  CHECK_THROWS_AS(load_wav(write_bytes("adpcm.wav", adpcm)), UnsupportedEncoding);

  auto empty = wav_bytes(1, 1, 8000, 16, {});
  CHECK_THROWS_AS(load_wav(write_bytes("empty.wav", empty)), EmptyAudio);

  auto truncated = wav_bytes(1, 1, 8000, 16, data);
  truncated.resize(truncated.size() - 1);
  truncated[40] = 0xFF;  // data chunk claims more than remains
  CHECK_THROWS_AS(load_wav(write_bytes("trunc.wav", truncated)), MalformedContainer);
}

TEST_CASE("unknown chunks are skipped") {
  std::vector<unsigned char> data;
  append16(data, 0x2000);
  std::vector<unsigned char> b;
  append_tag(b, "RIFF");
  append32(b, 0);  // placeholder; loader does not trust it
  append_tag(b, "WAVE");
  append_tag(b, "LIST");  // unknown chunk before fmt
  append32(b, 4);
  append32(b, 0xDEADBEEF);
  append_tag(b, "fmt ");
  append32(b, 16);
  append16(b, 1);
  append16(b, 1);
  append32(b, 16000);
  append32(b, 32000);
  append16(b, 2);
  append16(b, 16);
  append_tag(b, "data");
  append32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  const AudioClip clip = load_wav(write_bytes("chunks.wav", b));
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == doctest::Approx(0.25));
}

TEST_CASE("sine round trip through disk") {
  const AudioClip sine = sine_clip(440.0, 48000, 1.0);
  const auto path = temp_dir() / "sine440.wav";
  write_wav(path, sine);
  const AudioClip loaded = load_wav(path);
  REQUIRE(loaded.samples.size() == 48000);
  CHECK(loaded.sample_rate == 48000);
  double max_err = 0.0;
  for (std::size_t i = 0; i < loaded.samples.size(); ++i)
    max_err = std::max(max_err, std::abs(loaded.samples[i] - sine.samples[i]));
  CHECK(max_err < 1e-4);
}

TEST_CASE("load-write-load preserves samples to one quantization step") {
  AudioClip clip = sine_clip(313.7, 22050, 0.3);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] *= 0.8;
  const auto p1 = temp_dir() / "rt1.wav";
  const auto p2 = temp_dir() / "rt2.wav";
  write_wav(p1, clip);
  const AudioClip once = load_wav(p1);
  write_wav(p2, once);
  const AudioClip twice = load_wav(p2);
  REQUIRE(once.samples.size() == twice.samples.size());
  for (std::size_t i = 0; i < once.samples.size(); ++i)
    CHECK(std::abs(once.samples[i] - twice.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("resample identity at equal rates") {
  const AudioClip clip = sine_clip(440.0, 22050, 0.2);
  const AudioClip same = resample(clip, 22050);
  CHECK(same.samples == clip.samples);
}

TEST_CASE("resample keeps tone frequency") {
  const AudioClip clip = sine_clip(440.0, 48000, 1.0);
  const AudioClip down = resample(clip, 22050);
  // duration within one sample of the exact ratio
  CHECK(std::abs(static_cast<double>(down.samples.size()) - 22050.0) <= 1.0);
  const double freq = dominant_freq(down);
  const double bin_width = 22050.0 / 16384.0;
  CHECK(std::abs(freq - 440.0) <= bin_width + 1e-9);
}

TEST_CASE("resample preserves DC level") {
  AudioClip clip;
  clip.sample_rate = 44100;
  clip.samples.assign(8000, 0.3);
  const AudioClip out = resample(clip, 22050);
  for (std::size_t i = 16; i + 16 < out.samples.size(); ++i)
    CHECK(out.samples[i] == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("resample composes across rates") {
  // band-limited content well inside every passband
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(16000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 200.0 * t) +
                      0.3 * std::sin(2.0 * std::numbers::pi * 450.0 * t + 0.7);
  }
  const AudioClip direct = resample(clip, 6000);
  const AudioClip stepped = resample(resample(clip, 12000), 6000);
  REQUIRE(std::abs(static_cast<long long>(direct.samples.size()) -
                   static_cast<long long>(stepped.samples.size())) <= 1);
  double rms = 0.0;
  std::size_t count = 0;
  const std::size_t n = std::min(direct.samples.size(), stepped.samples.size());
  for (std::size_t i = 64; i + 64 < n; ++i) {
    const double d = direct.samples[i] - stepped.samples[i];
    rms += d * d;
    ++count;
  }
  rms = std::sqrt(rms / static_cast<double>(count));
  CHECK(rms < 1e-3);
}

TEST_CASE("mean absolute amplitude") {
  AudioClip zero;
  zero.sample_rate = 8000;
  zero.samples.assign(100, 0.0);
  CHECK(mean_abs_amplitude(zero) == 0.0);

  AudioClip square;
  square.sample_rate = 8000;
  square.samples.resize(100);
  for (std::size_t i = 0; i < 100; ++i) square.samples[i] = i % 2 ? 1.0 : -1.0;
  CHECK(mean_abs_amplitude(square) == doctest::Approx(1.0));

  // scale equivariance
  AudioClip clip = sine_clip(100.0, 8000, 0.1);
  const double base = mean_abs_amplitude(clip);
  for (double& s : clip.samples) s *= 0.25;
  CHECK(mean_abs_amplitude(clip) == doctest::Approx(0.25 * base).epsilon(1e-12));
}
