// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/stft.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "mixitkit/error.hpp"
#include "test_util.hpp"

namespace mixitkit {
namespace {

using testing::Gaussian;
using testing::RelL2;

std::vector<StftConfig> AllConfigs(std::initializer_list<std::size_t> sizes) {
  std::vector<StftConfig> out;
  for (std::size_t n : sizes)
    for (std::size_t ratio : {2, 4, 8})
      for (WindowType win : {WindowType::kHann, WindowType::kSqrtHann}) {
        StftConfig c;
        c.fft_size = n;
        c.hop = n / ratio;
        c.window = win;
        c.center_pad = true;
        out.push_back(c);
      }
  return out;
}

Spectrogram RandomSpec(std::mt19937_64& rng, std::size_t m, std::size_t t, std::size_t f) {
  Spectrogram s(m, t, f, 8000.0);
  std::normal_distribution<double> n;
  for (double& v : s.values()) v = n(rng);
  return s;
}

TEST(StftConfig, FrameCount) {
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  EXPECT_EQ(c.bins(), 129u);
  EXPECT_EQ(c.num_frames(1000), (1000 + 256 - 256) / 64 + 1);
  c.center_pad = false;
  EXPECT_EQ(c.num_frames(1000), (1000 - 256) / 64 + 1);
}

TEST(StftConfig, RejectsBadRatios) {
  StftConfig c;
  c.fft_size = 256;
  c.hop = 48;
  EXPECT_THROW(c.Validate(), Error);
  c.hop = 16;  // ratio 16
  EXPECT_THROW(c.Validate(), Error);
  c.fft_size = 300;
  c.hop = 150;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(Stft, ZeroInZeroOut) {
  StftConfig c;
  c.fft_size = 128;
  c.hop = 32;
  const Spectrogram s = Stft(Waveform(2, 500, 8000.0), c);
  for (double v : s.values()) EXPECT_EQ(v, 0.0);
  const Waveform back = Istft(s, c, 500);
  for (double v : back.samples()) EXPECT_EQ(v, 0.0);
}

TEST(Stft, ImpulseGivesFlatMagnitude) {
  StftConfig c;
  c.fft_size = 64;
  c.hop = 16;
  c.window = WindowType::kHann;
  Waveform w(1, 256, 8000.0);
  // Frame t covers padded samples [t hop, t hop + N); with center padding
  // sample i sits at offset i + N/2 - t hop in that frame.
  const std::size_t t = 4, offset = 20;
  const std::size_t i = t * c.hop + offset - c.fft_size / 2;
  w.at(0, i) = 1.0;
  const Spectrogram s = Stft(w, c);
  const double expected = MakeWindow(WindowType::kHann, 64)[offset];
  for (std::size_t f = 0; f < c.bins(); ++f)
    EXPECT_NEAR(std::hypot(s.re(0, t, f), s.im(0, t, f)), expected, 1e-12);
}

TEST(Stft, MatchesDirectDft) {
  StftConfig c;
  c.fft_size = 32;
  c.hop = 8;
  std::mt19937_64 rng(7);
  const Waveform w = Gaussian(rng, 1, 100, 8000.0);
  const Spectrogram s = Stft(w, c);
  const auto win = MakeWindow(c.window, c.fft_size);
  const std::size_t t = 5;
  for (std::size_t f = 0; f < c.bins(); ++f) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < c.fft_size; ++n) {
      const long idx = static_cast<long>(t * c.hop + n) - static_cast<long>(c.pad());
      const double x = idx >= 0 && idx < 100 ? w.at(0, static_cast<std::size_t>(idx)) : 0.0;
      acc += win[n] * x * std::polar(1.0, -2.0 * std::numbers::pi * double(f * n) / double(c.fft_size));
    }
    EXPECT_NEAR(s.re(0, t, f), acc.real(), 1e-10);
    EXPECT_NEAR(s.im(0, t, f), acc.imag(), 1e-10);
  }
}

TEST(Stft, BinCenteredSineConcentrates) {
  StftConfig c;
  c.fft_size = 512;
  c.hop = 128;
  c.window = WindowType::kHann;
  const std::size_t k = 37;
  const Waveform w = testing::Tone(static_cast<double>(k) * 8000.0 / 512.0, 1.0, 8000, 8000.0);
  const Spectrogram s = Stft(w, c);
  const std::size_t t = s.frames() / 2;
  // Hann main lobe: the peak bin and its two neighbours carry all the energy.
  double energy = 0.0, band = 0.0, peak = 0.0;
  std::size_t argmax = 0;
  for (std::size_t f = 0; f < c.bins(); ++f) {
    const double e = s.re(0, t, f) * s.re(0, t, f) + s.im(0, t, f) * s.im(0, t, f);
    energy += e;
    if (f + 1 >= k && f <= k + 1) band += e;
    if (e > peak) peak = e, argmax = f;
  }
  EXPECT_EQ(argmax, k);
  EXPECT_GE(band / energy, 0.999);
}

TEST(Istft, PerfectReconstructionAllConfigs) {
  std::mt19937_64 rng(11);
  for (const auto& c : AllConfigs({64, 256, 1024, 2048})) {
    for (std::size_t len : {std::size_t{800}, std::size_t{4410}, std::size_t{44100}}) {
      const Waveform w = Gaussian(rng, 2, len, 44100.0);
      EXPECT_LE(RelL2(w, Istft(Stft(w, c), c, len)), 1e-8)
          << c.fft_size << "/" << c.hop << " " << WindowName(c.window) << " L=" << len;
    }
  }
}

TEST(Istft, UncenteredReconstructsCoveredSpan) {
  std::mt19937_64 rng(12);
  for (auto c : AllConfigs({256})) {
    c.center_pad = false;
    const std::size_t len = 5000;
    const Waveform w = Gaussian(rng, 1, len, 8000.0);
    const Waveform r = Istft(Stft(w, c), c, len);
    // Edges lack full window overlap; compare the span every frame grid point covers.
    const std::size_t frames = c.num_frames(len);
    const std::size_t end = (frames - 1) * c.hop;
    const std::size_t begin = c.fft_size;
    double num = 0.0, den = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      num += (w.at(0, i) - r.at(0, i)) * (w.at(0, i) - r.at(0, i));
      den += w.at(0, i) * w.at(0, i);
    }
    EXPECT_LE(std::sqrt(num / den), 1e-8);
  }
}

TEST(Istft, Linearity) {
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  std::mt19937_64 rng(13);
  const std::size_t len = 3000, t = c.num_frames(len);
  const Spectrogram s1 = RandomSpec(rng, 1, t, c.bins()), s2 = RandomSpec(rng, 1, t, c.bins());
  Spectrogram comb = s1;
  for (std::size_t i = 0; i < comb.values().size(); ++i)
    comb.values()[i] = 2.5 * s1.values()[i] - 0.75 * s2.values()[i];
  const Waveform a = Istft(s1, c, len), b = Istft(s2, c, len), ab = Istft(comb, c, len);
  for (std::size_t i = 0; i < len; ++i) EXPECT_NEAR(ab.at(0, i), 2.5 * a.at(0, i) - 0.75 * b.at(0, i), 1e-9);
}

TEST(Adjoint, StftInnerProduct) {
  std::mt19937_64 rng(14);
  for (bool center : {true, false}) {
    for (int trial = 0; trial < 20; ++trial) {
      StftConfig c;
      c.fft_size = trial % 2 ? 128 : 64;
      c.hop = c.fft_size / (trial % 3 == 0 ? 2 : 4);
      c.window = trial % 2 ? WindowType::kHann : WindowType::kSqrtHann;
      c.center_pad = center;
      const std::size_t len = 700 + 13 * static_cast<std::size_t>(trial);
      const Waveform w = Gaussian(rng, 2, len, 8000.0);
      const Spectrogram s = RandomSpec(rng, 2, c.num_frames(len), c.bins());
      const double lhs = Dot(Stft(w, c), s);
      const double rhs = Dot(w, StftAdjoint(s, c, len));
      const double scale = std::sqrt(Energy(w) * Dot(s, s));
      EXPECT_LE(std::abs(lhs - rhs), 1e-9 * scale);
    }
  }
}

TEST(Adjoint, IstftInnerProduct) {
  std::mt19937_64 rng(15);
  for (bool center : {true, false}) {
    for (int trial = 0; trial < 20; ++trial) {
      StftConfig c;
      c.fft_size = trial % 2 ? 128 : 256;
      c.hop = c.fft_size / (trial % 3 == 0 ? 8 : 4);
      c.window = trial % 2 ? WindowType::kSqrtHann : WindowType::kHann;
      c.center_pad = center;
      const std::size_t len = 900 + 17 * static_cast<std::size_t>(trial);
      const Waveform g = Gaussian(rng, 1, len, 8000.0);
      const Spectrogram s = RandomSpec(rng, 1, c.num_frames(len), c.bins());
      const double lhs = Dot(Istft(s, c, len), g);
      const double rhs = Dot(s, IstftAdjoint(g, c));
      const double scale = std::sqrt(Energy(g) * Dot(s, s));
      EXPECT_LE(std::abs(lhs - rhs), 1e-9 * scale);
    }
  }
}

TEST(Adjoint, LinearityAndZero) {
  StftConfig c;
  c.fft_size = 64;
  c.hop = 16;
  std::mt19937_64 rng(16);
  const std::size_t len = 400;
  const Spectrogram s = RandomSpec(rng, 1, c.num_frames(len), c.bins());
  Spectrogram s2 = s;
  for (double& v : s2.values()) v *= 2.0;
  const Waveform a = StftAdjoint(s, c, len), b = StftAdjoint(s2, c, len);
  for (std::size_t i = 0; i < len; ++i) EXPECT_NEAR(b.at(0, i), 2.0 * a.at(0, i), 1e-12);
  Spectrogram z(1, c.num_frames(len), c.bins(), 8000.0);
  const Waveform adj_w = StftAdjoint(z, c, len);
  for (double v : adj_w.samples()) EXPECT_EQ(v, 0.0);
  const Spectrogram adj_s = IstftAdjoint(Waveform(1, len, 8000.0), c);
  for (double v : adj_s.values()) EXPECT_EQ(v, 0.0);

  const Waveform g1 = Gaussian(rng, 1, len, 8000.0), g2 = Gaussian(rng, 1, len, 8000.0);
  const Spectrogram sum = IstftAdjoint(Mix(g1, g2), c);
  const Spectrogram p1 = IstftAdjoint(g1, c), p2 = IstftAdjoint(g2, c);
  for (std::size_t i = 0; i < sum.values().size(); ++i)
    EXPECT_NEAR(sum.values()[i], p1.values()[i] + p2.values()[i], 1e-12);
}

TEST(Adjoint, FrameMismatchThrows) {
  StftConfig c;
  c.fft_size = 64;
  c.hop = 16;
  Spectrogram s(1, 3, c.bins(), 8000.0);
  EXPECT_THROW(StftAdjoint(s, c, 1000), Error);
}

// Hermitian-weighted spectral energy over full frames equals N * sum_t w^2,
// a constant times time-domain energy once the signal stays clear of the edges.
TEST(Stft, EnergyRatioIsConstant) {
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  std::mt19937_64 rng(17);
  std::vector<double> ratios;
  for (int trial = 0; trial < 10; ++trial) {
    Waveform w(1, 4000, 8000.0);
    const Waveform g = Gaussian(rng, 1, 3000, 8000.0, 0.1 + trial);
    for (std::size_t i = 0; i < 3000; ++i) w.at(0, 500 + i) = g.at(0, i);
    const Spectrogram s = Stft(w, c);
    double spec = 0.0;
    for (std::size_t t = 0; t < s.frames(); ++t)
      for (std::size_t f = 0; f < s.bins(); ++f) {
        const double weight = (f == 0 || f == s.bins() - 1) ? 1.0 : 2.0;
        spec += weight * (s.re(0, t, f) * s.re(0, t, f) + s.im(0, t, f) * s.im(0, t, f));
      }
    ratios.push_back(spec / Energy(w));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LE((*hi - *lo) / *lo, 1e-6);
  const auto win = MakeWindow(c.window, c.fft_size);
  double sumsq = 0.0;
  for (double v : win) sumsq += v * v;
  EXPECT_NEAR(ratios[0], static_cast<double>(c.fft_size) * sumsq / static_cast<double>(c.hop), 1e-6 * ratios[0]);
}

}  // namespace
}  // namespace mixitkit
