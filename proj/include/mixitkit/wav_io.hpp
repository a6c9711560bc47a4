// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// RIFF WAV reader/writer: 16-bit PCM and 32-bit IEEE float, 1-2 channels.

#ifndef MIXITKIT_WAV_IO_HPP_
#define MIXITKIT_WAV_IO_HPP_

#include <cstdint>
#include <filesystem>

#include "mixitkit/audio.hpp"

namespace mixitkit {

enum class SampleFormat { kPcm16, kFloat32 };

struct WavInfo {
  std::size_t channels = 0;
  double sample_rate = 0.0;
  std::size_t frames = 0;
  SampleFormat format = SampleFormat::kPcm16;

  double duration_s() const { return static_cast<double>(frames) / sample_rate; }
};

// Header-only probe. Throws Io on open failure, UnsupportedFormat otherwise.
WavInfo ReadWavInfo(const std::filesystem::path& path);
Waveform ReadWav(const std::filesystem::path& path);
void WriteWav(const std::filesystem::path& path, const Waveform& w,
              SampleFormat format = SampleFormat::kFloat32);

}  // namespace mixitkit

#endif  // MIXITKIT_WAV_IO_HPP_
