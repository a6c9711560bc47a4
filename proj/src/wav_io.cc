// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/wav_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T ReadLe(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename T>
void WriteLe(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct ParsedHeader {
  WavInfo info;
  std::streamoff data_offset = 0;
};

ParsedHeader ParseHeader(std::istream& in, const std::string& name) {
  std::array<char, 4> tag{};
  in.read(tag.data(), 4);
  ReadLe<std::uint32_t>(in);
  std::array<char, 4> wave{};
  in.read(wave.data(), 4);
  if (!in || std::memcmp(tag.data(), "RIFF", 4) != 0 || std::memcmp(wave.data(), "WAVE", 4) != 0)
    throw Error(ErrorKind::kUnsupportedFormat, name + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (in) {
    std::array<char, 4> id{};
    in.read(id.data(), 4);
    const auto size = ReadLe<std::uint32_t>(in);
    if (!in) break;
    const std::streamoff body = in.tellg();
    if (std::memcmp(id.data(), "fmt ", 4) == 0) {
      format = ReadLe<std::uint16_t>(in);
      channels = ReadLe<std::uint16_t>(in);
      rate = ReadLe<std::uint32_t>(in);
      ReadLe<std::uint32_t>(in);  // byte rate
      ReadLe<std::uint16_t>(in);  // block align
      bits = ReadLe<std::uint16_t>(in);
      if (format == kFormatExtensible && size >= 40) {
        ReadLe<std::uint16_t>(in);  // cbSize
        ReadLe<std::uint16_t>(in);  // valid bits
        ReadLe<std::uint32_t>(in);  // channel mask
        format = ReadLe<std::uint16_t>(in);  // leading bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id.data(), "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorKind::kUnsupportedFormat, name + ": data chunk before fmt");
      ParsedHeader h;
      if (channels < 1 || channels > 2)
        throw Error(ErrorKind::kUnsupportedFormat,
                    name + ": " + std::to_string(channels) + " channels (1-2 supported)");
      if (format == kFormatPcm && bits == 16) {
        h.info.format = SampleFormat::kPcm16;
      } else if (format == kFormatFloat && bits == 32) {
        h.info.format = SampleFormat::kFloat32;
      } else {
        throw Error(ErrorKind::kUnsupportedFormat,
                    name + ": format tag " + std::to_string(format) + " with " +
                        std::to_string(bits) + " bits (need 16-bit PCM or 32-bit float)");
      }
      if (rate == 0) throw Error(ErrorKind::kUnsupportedFormat, name + ": zero sample rate");
      h.info.channels = channels;
      h.info.sample_rate = rate;
      h.info.frames = size / (channels * (bits / 8));
      h.data_offset = body;
      return h;
    }
    in.seekg(body + static_cast<std::streamoff>(size + (size & 1u)));
  }
  throw Error(ErrorKind::kUnsupportedFormat, name + ": no data chunk");
}

std::ifstream Open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

}  // namespace

WavInfo ReadWavInfo(const std::filesystem::path& path) {
  auto in = Open(path);
  return ParseHeader(in, path.string()).info;
}

Waveform ReadWav(const std::filesystem::path& path) {
  auto in = Open(path);
  const ParsedHeader h = ParseHeader(in, path.string());
  const WavInfo& info = h.info;
  in.seekg(h.data_offset);
  const std::size_t n = info.frames * info.channels;
  std::vector<double> interleaved(n);
  if (info.format == SampleFormat::kPcm16) {
    std::vector<std::int16_t> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
    for (std::size_t i = 0; i < n; ++i) interleaved[i] = raw[i] / 32768.0;
  } else {
    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
    for (std::size_t i = 0; i < n; ++i) interleaved[i] = raw[i];
  }
  if (!in) throw Error(ErrorKind::kIo, path.string() + ": truncated data chunk");

  Waveform w(info.channels, info.frames, info.sample_rate);
  for (std::size_t i = 0; i < info.frames; ++i)
    for (std::size_t m = 0; m < info.channels; ++m)
      w.at(m, i) = interleaved[i * info.channels + m];
  for (double s : w.samples())
    if (!std::isfinite(s)) throw Error(ErrorKind::kUnsupportedFormat, path.string() + ": non-finite sample");
  return w;
}

void WriteWav(const std::filesystem::path& path, const Waveform& w, SampleFormat format) {
  if (w.channels() < 1 || w.channels() > 2)
    throw Error(ErrorKind::kUnsupportedFormat, "can only write 1-2 channel WAV");
  const auto rate = static_cast<std::uint32_t>(std::llround(w.sample_rate()));
  if (static_cast<double>(rate) != w.sample_rate())
    throw Error(ErrorKind::kUnsupportedFormat, "non-integer sample rate");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const std::uint16_t channels = static_cast<std::uint16_t>(w.channels());
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint16_t block = channels * (bits / 8);
  const auto data_bytes = static_cast<std::uint32_t>(w.length() * block);

  out.write("RIFF", 4);
  WriteLe<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  WriteLe<std::uint32_t>(out, 16);
  WriteLe<std::uint16_t>(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  WriteLe<std::uint16_t>(out, channels);
  WriteLe<std::uint32_t>(out, rate);
  WriteLe<std::uint32_t>(out, rate * block);
  WriteLe<std::uint16_t>(out, block);
  WriteLe<std::uint16_t>(out, bits);
  out.write("data", 4);
  WriteLe<std::uint32_t>(out, data_bytes);

  for (std::size_t i = 0; i < w.length(); ++i) {
    for (std::size_t m = 0; m < w.channels(); ++m) {
      const double s = w.at(m, i);
      if (format == SampleFormat::kPcm16) {
        const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        WriteLe<std::int16_t>(out, static_cast<std::int16_t>(scaled));
      } else {
        WriteLe<float>(out, static_cast<float>(s));
      }
    }
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace mixitkit
