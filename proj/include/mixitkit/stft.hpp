// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Short-time Fourier transform pair plus the transposes of both linear maps,
// used to backpropagate through mask-based separators.
//
// Conventions: periodic window, zero center padding of fft_size / 2, un-normalized
// forward real FFT, 1 / fft_size on the inverse, and per-sample normalization of
// the overlap-add by the summed product of analysis and synthesis windows.

#ifndef MIXITKIT_STFT_HPP_
#define MIXITKIT_STFT_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mixitkit/audio.hpp"

namespace mixitkit {

enum class WindowType { kHann, kSqrtHann };

std::string WindowName(WindowType w);
WindowType ParseWindow(const std::string& name);

struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;
  WindowType window = WindowType::kSqrtHann;
  bool center_pad = true;

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t pad() const { return center_pad ? fft_size / 2 : 0; }
  // Frames produced for a signal of `length` samples.
  std::size_t num_frames(std::size_t length) const;
  // Throws IncompatibleConfig unless fft_size is a power of two and
  // fft_size / hop is 2, 4 or 8.
  void Validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

std::vector<double> MakeWindow(WindowType type, std::size_t size);

// Real/imaginary planes x channels x frames x bins.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t channels, std::size_t frames, std::size_t bins, double sample_rate);

  std::size_t channels() const { return channels_; }
  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  double sample_rate() const { return sample_rate_; }

  std::size_t index(std::size_t ri, std::size_t m, std::size_t t, std::size_t f) const {
    return ((ri * channels_ + m) * frames_ + t) * bins_ + f;
  }
  double& re(std::size_t m, std::size_t t, std::size_t f) { return values_[index(0, m, t, f)]; }
  double& im(std::size_t m, std::size_t t, std::size_t f) { return values_[index(1, m, t, f)]; }
  double re(std::size_t m, std::size_t t, std::size_t f) const { return values_[index(0, m, t, f)]; }
  double im(std::size_t m, std::size_t t, std::size_t f) const { return values_[index(1, m, t, f)]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  bool same_shape(const Spectrogram& o) const {
    return channels_ == o.channels_ && frames_ == o.frames_ && bins_ == o.bins_;
  }

 private:
  std::size_t channels_ = 0;
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  double sample_rate_ = 1.0;
  std::vector<double> values_;
};

Spectrogram Stft(const Waveform& w, const StftConfig& cfg);
// Output trimmed (or zero-padded) to `length` samples.
Waveform Istft(const Spectrogram& s, const StftConfig& cfg, std::size_t length);
// Transpose of Stft for signals of `length` samples: <Stft(w), S> = <w, StftAdjoint(S)>.
Waveform StftAdjoint(const Spectrogram& g, const StftConfig& cfg, std::size_t length);
// Transpose of Istft(., cfg, g.length()) over spectrograms of num_frames(g.length()) frames.
Spectrogram IstftAdjoint(const Waveform& g, const StftConfig& cfg);

double Dot(const Spectrogram& a, const Spectrogram& b);

}  // namespace mixitkit

#endif  // MIXITKIT_STFT_HPP_
