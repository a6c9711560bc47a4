// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and then executed through the new-array interface, which is.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

std::mutex& PlanMutex() {
  static std::mutex mu;
  return mu;
}

const PlanPair& PlansFor(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(PlanMutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* real = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec, FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(spec);
  return cache.emplace(n, p).first->second;
}

struct RealBuf {
  explicit RealBuf(std::size_t n) : p(fftw_alloc_real(n)) {}
  ~RealBuf() { fftw_free(p); }
  RealBuf(const RealBuf&) = delete;
  RealBuf& operator=(const RealBuf&) = delete;
  double* p;
};

struct ComplexBuf {
  explicit ComplexBuf(std::size_t n) : p(fftw_alloc_complex(n)) {}
  ~ComplexBuf() { fftw_free(p); }
  ComplexBuf(const ComplexBuf&) = delete;
  ComplexBuf& operator=(const ComplexBuf&) = delete;
  fftw_complex* p;
};

std::size_t PaddedLength(const StftConfig& cfg, std::size_t frames) {
  return (frames - 1) * cfg.hop + cfg.fft_size;
}

// 1 / sum_t w[p - t*hop]^2 over the padded buffer; 0 where no window covers p.
std::vector<double> InverseWindowSum(const std::vector<double>& window, const StftConfig& cfg,
                                     std::size_t frames) {
  const std::size_t padded = PaddedLength(cfg, frames);
  std::vector<double> den(padded, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < cfg.fft_size; ++n) den[t * cfg.hop + n] += window[n] * window[n];
  double peak = 0.0;
  for (double d : den) peak = std::max(peak, d);
  for (double& d : den) d = d > 1e-10 * peak ? 1.0 / d : 0.0;
  return den;
}

void CheckSpectrogram(const Spectrogram& s, const StftConfig& cfg) {
  if (s.bins() != cfg.bins())
    throw Error(ErrorKind::kIncompatibleConfig,
                "spectrogram has " + std::to_string(s.bins()) + " bins, config expects " +
                    std::to_string(cfg.bins()));
  if (s.frames() == 0) throw Error(ErrorKind::kIncompatibleConfig, "spectrogram has no frames");
}

}  // namespace

std::string WindowName(WindowType w) { return w == WindowType::kHann ? "hann" : "sqrt_hann"; }

WindowType ParseWindow(const std::string& name) {
  if (name == "hann") return WindowType::kHann;
  if (name == "sqrt_hann") return WindowType::kSqrtHann;
  throw Error(ErrorKind::kIncompatibleConfig, "unknown window '" + name + "'");
}

std::size_t StftConfig::num_frames(std::size_t length) const {
  const std::size_t padded = std::max(length + 2 * pad(), fft_size);
  return (padded - fft_size) / hop + 1;
}

void StftConfig::Validate() const {
  const bool pow2 = fft_size >= 4 && (fft_size & (fft_size - 1)) == 0;
  if (!pow2)
    throw Error(ErrorKind::kIncompatibleConfig,
                "fft_size " + std::to_string(fft_size) + " is not a power of two");
  if (hop == 0 || fft_size % hop != 0)
    throw Error(ErrorKind::kIncompatibleConfig, "hop must divide fft_size");
  const std::size_t ratio = fft_size / hop;
  if (ratio != 2 && ratio != 4 && ratio != 8)
    throw Error(ErrorKind::kIncompatibleConfig,
                "fft_size / hop must be 2, 4 or 8 (got " + std::to_string(ratio) + ")");
}

std::vector<double> MakeWindow(WindowType type, std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t n = 0; n < size; ++n) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
    w[n] = type == WindowType::kHann ? hann : std::sqrt(hann);
  }
  return w;
}

Spectrogram::Spectrogram(std::size_t channels, std::size_t frames, std::size_t bins,
                         double sample_rate)
    : channels_(channels),
      frames_(frames),
      bins_(bins),
      sample_rate_(sample_rate),
      values_(2 * channels * frames * bins, 0.0) {}

double Dot(const Spectrogram& a, const Spectrogram& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::kShapeMismatch, "spectrogram dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) acc += a.values()[i] * b.values()[i];
  return acc;
}

Spectrogram Stft(const Waveform& w, const StftConfig& cfg) {
  cfg.Validate();
  const std::size_t n_fft = cfg.fft_size;
  const std::size_t frames = cfg.num_frames(w.length());
  const std::size_t bins = cfg.bins();
  const std::size_t pad = cfg.pad();
  const auto window = MakeWindow(cfg.window, n_fft);
  const PlanPair& plans = PlansFor(n_fft);

  Spectrogram s(w.channels(), frames, bins, w.sample_rate());
  std::vector<double> padded(std::max(PaddedLength(cfg, frames), w.length() + 2 * pad), 0.0);
  RealBuf frame(n_fft);
  ComplexBuf spec(bins);
  for (std::size_t m = 0; m < w.channels(); ++m) {
    std::fill(padded.begin(), padded.end(), 0.0);
    auto ch = w.channel(m);
    std::copy(ch.begin(), ch.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
    for (std::size_t t = 0; t < frames; ++t) {
      const double* src = padded.data() + t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) frame.p[n] = window[n] * src[n];
      fftw_execute_dft_r2c(plans.r2c, frame.p, spec.p);
      for (std::size_t f = 0; f < bins; ++f) {
        s.re(m, t, f) = spec.p[f][0];
        s.im(m, t, f) = spec.p[f][1];
      }
    }
  }
  return s;
}

Waveform Istft(const Spectrogram& s, const StftConfig& cfg, std::size_t length) {
  cfg.Validate();
  CheckSpectrogram(s, cfg);
  const std::size_t n_fft = cfg.fft_size;
  const std::size_t frames = s.frames();
  const std::size_t bins = cfg.bins();
  const std::size_t pad = cfg.pad();
  const std::size_t padded_len = PaddedLength(cfg, frames);
  const auto window = MakeWindow(cfg.window, n_fft);
  const auto inv_den = InverseWindowSum(window, cfg, frames);
  const PlanPair& plans = PlansFor(n_fft);
  const double scale = 1.0 / static_cast<double>(n_fft);

  Waveform out(s.channels(), length, s.sample_rate());
  std::vector<double> acc(padded_len);
  RealBuf frame(n_fft);
  ComplexBuf spec(bins);
  for (std::size_t m = 0; m < s.channels(); ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) {
        spec.p[f][0] = s.re(m, t, f);
        spec.p[f][1] = s.im(m, t, f);
      }
      fftw_execute_dft_c2r(plans.c2r, spec.p, frame.p);
      double* dst = acc.data() + t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) dst[n] += window[n] * frame.p[n] * scale;
    }
    auto ch = out.channel(m);
    for (std::size_t j = 0; j < length && j + pad < padded_len; ++j)
      ch[j] = acc[j + pad] * inv_den[j + pad];
  }
  return out;
}

Waveform StftAdjoint(const Spectrogram& g, const StftConfig& cfg, std::size_t length) {
  cfg.Validate();
  CheckSpectrogram(g, cfg);
  if (g.frames() != cfg.num_frames(length))
    throw Error(ErrorKind::kIncompatibleConfig,
                std::to_string(g.frames()) + " frames do not match a " + std::to_string(length) +
                    "-sample signal");
  const std::size_t n_fft = cfg.fft_size;
  const std::size_t frames = g.frames();
  const std::size_t bins = cfg.bins();
  const std::size_t pad = cfg.pad();
  const auto window = MakeWindow(cfg.window, n_fft);
  const PlanPair& plans = PlansFor(n_fft);

  Waveform out(g.channels(), length, g.sample_rate());
  std::vector<double> acc(std::max(PaddedLength(cfg, frames), length + 2 * pad));
  RealBuf frame(n_fft);
  ComplexBuf spec(bins);
  for (std::size_t m = 0; m < g.channels(); ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      // The inverse real FFT doubles interior bins, so halve them first; the
      // imaginary parts of DC and Nyquist are ignored, matching their zero
      // contribution in the forward map.
      for (std::size_t f = 0; f < bins; ++f) {
        const double k = (f == 0 || f == bins - 1) ? 1.0 : 0.5;
        spec.p[f][0] = k * g.re(m, t, f);
        spec.p[f][1] = k * g.im(m, t, f);
      }
      fftw_execute_dft_c2r(plans.c2r, spec.p, frame.p);
      double* dst = acc.data() + t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) dst[n] += window[n] * frame.p[n];
    }
    auto ch = out.channel(m);
    for (std::size_t j = 0; j < length; ++j) ch[j] = acc[j + pad];
  }
  return out;
}

Spectrogram IstftAdjoint(const Waveform& g, const StftConfig& cfg) {
  cfg.Validate();
  const std::size_t n_fft = cfg.fft_size;
  const std::size_t frames = cfg.num_frames(g.length());
  const std::size_t bins = cfg.bins();
  const std::size_t pad = cfg.pad();
  const std::size_t padded_len = PaddedLength(cfg, frames);
  const auto window = MakeWindow(cfg.window, n_fft);
  const auto inv_den = InverseWindowSum(window, cfg, frames);
  const PlanPair& plans = PlansFor(n_fft);
  const double scale = 1.0 / static_cast<double>(n_fft);

  Spectrogram s(g.channels(), frames, bins, g.sample_rate());
  std::vector<double> scattered(padded_len);
  RealBuf frame(n_fft);
  ComplexBuf spec(bins);
  for (std::size_t m = 0; m < g.channels(); ++m) {
    std::fill(scattered.begin(), scattered.end(), 0.0);
    auto ch = g.channel(m);
    for (std::size_t j = 0; j < g.length() && j + pad < padded_len; ++j)
      scattered[j + pad] = ch[j] * inv_den[j + pad];
    for (std::size_t t = 0; t < frames; ++t) {
      const double* src = scattered.data() + t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) frame.p[n] = window[n] * src[n] * scale;
      fftw_execute_dft_r2c(plans.r2c, frame.p, spec.p);
      for (std::size_t f = 0; f < bins; ++f) {
        const bool edge = f == 0 || f == bins - 1;
        s.re(m, t, f) = edge ? spec.p[f][0] : 2.0 * spec.p[f][0];
        s.im(m, t, f) = edge ? 0.0 : 2.0 * spec.p[f][1];
      }
    }
  }
  return s;
}

}  // namespace mixitkit
