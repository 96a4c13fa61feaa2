#include "timbre/audio.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <vector>

#include "timbre/binio.hpp"
#include "timbre/errors.hpp"

namespace timbre {

namespace {

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const char* p, const FmtChunk& fmt) {
  switch (fmt.bits) {
    case 16: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return double(v) / 32768.0;
    }
    case 24: {
      std::int32_t v = (std::uint8_t(p[0])) | (std::uint8_t(p[1]) << 8) |
                       (std::int32_t(std::int8_t(p[2])) << 16);
      return double(v) / 8388608.0;
    }
    case 32: {
      float v;
      std::memcpy(&v, p, 4);
      return double(v);
    }
    default:
      throw FormatError("unsupported WAV bit depth");
  }
}

}  // namespace

AudioBuffer load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  expect_magic(is, "RIFF");
  read_le<std::uint32_t>(is);
  expect_magic(is, "WAVE");

  FmtChunk fmt;
  std::vector<char> data;
  bool have_fmt = false, have_data = false;
  while (is && !(have_fmt && have_data)) {
    char id[4];
    is.read(id, 4);
    if (!is) break;
    auto size = read_le<std::uint32_t>(is);
    std::string chunk(id, 4);
    if (chunk == "fmt ") {
      fmt.format = read_le<std::uint16_t>(is);
      fmt.channels = read_le<std::uint16_t>(is);
      fmt.sample_rate = read_le<std::uint32_t>(is);
      read_le<std::uint32_t>(is);  // byte rate
      read_le<std::uint16_t>(is);  // block align
      fmt.bits = read_le<std::uint16_t>(is);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (chunk == "data") {
      data.resize(size);
      is.read(data.data(), size);
      if (!is) throw FormatError("truncated WAV data in " + path);
      have_data = true;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) throw FormatError("missing WAV chunks in " + path);
  if (fmt.format != 1 && fmt.format != 3)
    throw FormatError("unsupported WAV format tag in " + path);
  if (fmt.format == 3 && fmt.bits != 32)
    throw FormatError("float WAV must be 32-bit: " + path);
  if (fmt.channels < 1 || fmt.channels > 2)
    throw FormatError("only mono or stereo WAV supported: " + path);

  const int bytes = fmt.bits / 8;
  const std::size_t stride = std::size_t(bytes) * fmt.channels;
  const std::size_t n = data.size() / stride;
  AudioBuffer out;
  out.sample_rate = fmt.sample_rate;
  out.samples.resize(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    const char* p = data.data() + i * stride;
    double acc = 0;
    for (int c = 0; c < fmt.channels; ++c) acc += decode_sample(p + c * bytes, fmt);
    out.samples[Eigen::Index(i)] = acc / fmt.channels;
  }
  return out;
}

void save_wav(const std::string& path, const AudioBuffer& audio) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  const std::uint32_t n = std::uint32_t(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  write_magic(os, "RIFF");
  write_le<std::uint32_t>(os, 36 + data_bytes);
  write_magic(os, "WAVE");
  write_magic(os, "fmt ");
  write_le<std::uint32_t>(os, 16);
  write_le<std::uint16_t>(os, 1);  // PCM
  write_le<std::uint16_t>(os, 1);  // mono
  write_le<std::uint32_t>(os, std::uint32_t(audio.sample_rate));
  write_le<std::uint32_t>(os, std::uint32_t(audio.sample_rate) * 2);
  write_le<std::uint16_t>(os, 2);
  write_le<std::uint16_t>(os, 16);
  write_magic(os, "data");
  write_le<std::uint32_t>(os, data_bytes);
  for (Eigen::Index i = 0; i < audio.samples.size(); ++i) {
    const long q = std::lrint(std::clamp(audio.samples[i], -1.0, 1.0) * 32768.0);
    write_le<std::int16_t>(os, std::int16_t(std::clamp(q, -32768L, 32767L)));
  }
  if (!os) throw IoError("failed writing " + path);
}

AudioBuffer resample(const AudioBuffer& in, double target_rate) {
  if (in.sample_rate <= 0) throw FormatError("invalid sample rate");
  if (in.sample_rate == target_rate) return in;

  const double ratio = target_rate / in.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // fraction of input Nyquist
  constexpr int kTaps = 64;
  constexpr int kHalf = kTaps / 2;
  const Eigen::Index n_out =
      Eigen::Index(std::floor(double(in.samples.size()) * ratio));

  auto kernel = [&](double u) {
    // Hann-windowed sinc, support |u| < kHalf.
    if (std::abs(u) >= kHalf) return 0.0;
    const double x = std::numbers::pi * u;
    const double sinc = x == 0.0 ? 1.0 : std::sin(cutoff * x) / x;
    const double w = 0.5 + 0.5 * std::cos(x / kHalf);
    return sinc * w;
  };

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.setZero(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const double t = double(i) / ratio;
    const auto base = Eigen::Index(std::floor(t));
    double acc = 0, wsum = 0;
    for (Eigen::Index k = base - kHalf + 1; k <= base + kHalf; ++k) {
      const double w = kernel(t - double(k));
      wsum += w;
      if (k >= 0 && k < in.samples.size()) acc += w * in.samples[k];
    }
    // normalizing by the kernel sum pins the DC gain at exactly 1
    out.samples[i] = wsum != 0 ? acc / wsum : 0.0;
  }
  return out;
}

}  // namespace timbre
