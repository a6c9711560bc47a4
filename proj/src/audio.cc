// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/audio.hpp"

#include <cmath>
#include <string>

#include "mixitkit/error.hpp"

namespace mixitkit {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kAllZeroSignal: return "AllZeroSignal";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kIncompatibleConfig: return "IncompatibleConfig";
    case ErrorKind::kZeroReference: return "ZeroReference";
    case ErrorKind::kZeroMixture: return "ZeroMixture";
    case ErrorKind::kTooManySources: return "TooManySources";
    case ErrorKind::kSingularGram: return "SingularGram";
    case ErrorKind::kUnreadableFile: return "UnreadableFile";
    case ErrorKind::kInsufficientData: return "InsufficientData";
    case ErrorKind::kDegenerateBatch: return "DegenerateBatch";
    case ErrorKind::kBandMismatch: return "BandMismatch";
    case ErrorKind::kStaleCache: return "StaleCache";
    case ErrorKind::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::kInvalidSelection: return "InvalidSelection";
    case ErrorKind::kEmptyValidation: return "EmptyValidation";
    case ErrorKind::kMissingStem: return "MissingStem";
    case ErrorKind::kNoScorableChunks: return "NoScorableChunks";
    case ErrorKind::kBadCheckpoint: return "BadCheckpoint";
    case ErrorKind::kConfig: return "ConfigError";
  }
  return "Unknown";
}

Waveform::Waveform(std::size_t channels, std::size_t length, double sample_rate)
    : channels_(channels),
      length_(length),
      sample_rate_(sample_rate),
      samples_(channels * length, 0.0) {
  if (channels == 0) throw Error(ErrorKind::kShapeMismatch, "waveform needs >= 1 channel");
  if (!(sample_rate > 0.0)) throw Error(ErrorKind::kShapeMismatch, "sample_rate must be > 0");
}

Waveform::Waveform(std::size_t channels, double sample_rate, std::vector<double> samples)
    : channels_(channels), sample_rate_(sample_rate), samples_(std::move(samples)) {
  if (channels == 0) throw Error(ErrorKind::kShapeMismatch, "waveform needs >= 1 channel");
  if (!(sample_rate > 0.0)) throw Error(ErrorKind::kShapeMismatch, "sample_rate must be > 0");
  if (samples_.size() % channels != 0)
    throw Error(ErrorKind::kShapeMismatch, "sample count not divisible by channel count");
  length_ = samples_.size() / channels;
  for (double s : samples_)
    if (!std::isfinite(s)) throw Error(ErrorKind::kShapeMismatch, "non-finite sample");
}

Waveform Waveform::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length_)
    throw Error(ErrorKind::kShapeMismatch, "slice [" + std::to_string(begin) + ", " +
                                               std::to_string(begin + count) +
                                               ") exceeds length " + std::to_string(length_));
  Waveform out(channels_, count, sample_rate_);
  for (std::size_t m = 0; m < channels_; ++m) {
    auto src = channel(m).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.channel(m).begin());
  }
  return out;
}

bool Waveform::same_shape(const Waveform& other) const {
  return channels_ == other.channels_ && length_ == other.length_ &&
         sample_rate_ == other.sample_rate_;
}

void CheckSameShape(const Waveform& a, const Waveform& b, const char* what) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::kShapeMismatch,
                std::string(what) + ": (" + std::to_string(a.channels()) + "x" +
                    std::to_string(a.length()) + " @" + std::to_string(a.sample_rate()) +
                    ") vs (" + std::to_string(b.channels()) + "x" + std::to_string(b.length()) +
                    " @" + std::to_string(b.sample_rate()) + ")");
}

double Energy(const Waveform& w) {
  double acc = 0.0;
  for (double s : w.samples()) acc += s * s;
  return acc;
}

double Dot(const Waveform& a, const Waveform& b) {
  CheckSameShape(a, b, "dot");
  double acc = 0.0;
  const auto& x = a.samples();
  const auto& y = b.samples();
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double Rms(const Waveform& w) {
  if (w.samples().empty()) return 0.0;
  return std::sqrt(Energy(w) / static_cast<double>(w.samples().size()));
}

Waveform RmsNormalize(const Waveform& w) {
  const double rms = Rms(w);
  if (rms < 1e-12) throw Error(ErrorKind::kAllZeroSignal, "rms below 1e-12");
  Waveform out = w;
  for (double& s : out.samples()) s /= rms;
  return out;
}

Waveform ApplyGainDb(const Waveform& w, double gain_db) {
  const double g = std::pow(10.0, gain_db / 20.0);
  Waveform out = w;
  for (double& s : out.samples()) s *= g;
  return out;
}

void AddInPlace(Waveform& acc, const Waveform& w) {
  CheckSameShape(acc, w, "mix");
  auto& a = acc.samples();
  const auto& b = w.samples();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Waveform Mix(std::span<const Waveform> ws) {
  if (ws.empty()) throw Error(ErrorKind::kShapeMismatch, "mix of zero waveforms");
  Waveform out = ws.front();
  for (std::size_t i = 1; i < ws.size(); ++i) AddInPlace(out, ws[i]);
  return out;
}

Waveform Mix(const Waveform& a, const Waveform& b) {
  Waveform out = a;
  AddInPlace(out, b);
  return out;
}

PowerProfile ComputePowerProfile(const Waveform& w, double interval_s) {
  if (!(interval_s > 0.0)) throw Error(ErrorKind::kShapeMismatch, "interval_s must be > 0");
  PowerProfile profile;
  profile.interval_s = interval_s;
  const auto interval =
      static_cast<std::size_t>(std::llround(interval_s * w.sample_rate()));
  if (interval == 0) throw Error(ErrorKind::kShapeMismatch, "interval shorter than one sample");
  const std::size_t length = w.length();
  const std::size_t count = (length + interval - 1) / interval;
  profile.powers.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t begin = k * interval;
    const std::size_t end = std::min(length, begin + interval);
    double acc = 0.0;
    for (std::size_t m = 0; m < w.channels(); ++m) {
      auto ch = w.channel(m);
      for (std::size_t i = begin; i < end; ++i) acc += ch[i] * ch[i];
    }
    profile.powers.push_back(acc / static_cast<double>((end - begin) * w.channels()));
  }
  return profile;
}

}  // namespace mixitkit
