// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIXITKIT_AUDIO_HPP_
#define MIXITKIT_AUDIO_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace mixitkit {

// Multichannel real signal, channel-major storage (channel m occupies
// samples()[m * L, (m + 1) * L)).
class Waveform {
 public:
  Waveform() = default;
  Waveform(std::size_t channels, std::size_t length, double sample_rate);
  Waveform(std::size_t channels, double sample_rate, std::vector<double> samples);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  double sample_rate() const { return sample_rate_; }
  double duration_s() const { return static_cast<double>(length_) / sample_rate_; }
  bool empty() const { return samples_.empty(); }

  std::span<double> channel(std::size_t m) {
    return {samples_.data() + m * length_, length_};
  }
  std::span<const double> channel(std::size_t m) const {
    return {samples_.data() + m * length_, length_};
  }
  double& at(std::size_t m, std::size_t i) { return samples_[m * length_ + i]; }
  double at(std::size_t m, std::size_t i) const { return samples_[m * length_ + i]; }

  std::vector<double>& samples() { return samples_; }
  const std::vector<double>& samples() const { return samples_; }

  // Copy of samples [begin, begin + count) on every channel.
  Waveform slice(std::size_t begin, std::size_t count) const;
  bool same_shape(const Waveform& other) const;

  friend bool operator==(const Waveform&, const Waveform&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  double sample_rate_ = 1.0;
  std::vector<double> samples_;
};

struct PowerProfile {
  double interval_s = 1.0;
  std::vector<double> powers;
};

// Joint RMS over all channels.
double Rms(const Waveform& w);
double Energy(const Waveform& w);
double Dot(const Waveform& a, const Waveform& b);

// Throws AllZeroSignal when the RMS is below 1e-12.
Waveform RmsNormalize(const Waveform& w);
Waveform ApplyGainDb(const Waveform& w, double gain_db);
Waveform Mix(std::span<const Waveform> ws);
Waveform Mix(const Waveform& a, const Waveform& b);
void AddInPlace(Waveform& acc, const Waveform& w);
PowerProfile ComputePowerProfile(const Waveform& w, double interval_s = 1.0);

// Throws ShapeMismatch naming `what` when shapes or sample rates differ.
void CheckSameShape(const Waveform& a, const Waveform& b, const char* what);

}  // namespace mixitkit

#endif  // MIXITKIT_AUDIO_HPP_
