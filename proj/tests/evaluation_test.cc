// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "mixitkit/error.hpp"
#include "mixitkit/stft.hpp"
#include "test_util.hpp"

namespace mixitkit {
namespace {

using testing::Gaussian;
using testing::RelL2;
using testing::TempDir;

// est = ref + noise scaled so that |noise|^2 / |ref|^2 = 10^(-snr_db / 10).
Waveform AtSnr(const Waveform& ref, double snr_db, std::mt19937_64& rng) {
  Waveform noise = Gaussian(rng, ref.channels(), ref.length(), ref.sample_rate());
  const double scale = std::sqrt(Energy(ref) / Energy(noise) * std::pow(10.0, -snr_db / 10.0));
  for (double& v : noise.samples()) v *= scale;
  return Mix(ref, noise);
}

class IdentitySeparator : public Separator {
 public:
  std::size_t num_outputs() const override { return 4; }
  std::vector<Waveform> Separate(const Waveform& mix) const override {
    return std::vector<Waveform>(4, mix);
  }
};

// Output n applies the real mask 0.5 + a_n cos(2 pi f / fft_size), a 3-tap kernel.
class FixedMaskSeparator : public Separator {
 public:
  explicit FixedMaskSeparator(StftConfig c) : c_(c) {}
  std::size_t num_outputs() const override { return 4; }
  std::vector<Waveform> Separate(const Waveform& mix) const override {
    const Spectrogram s = Stft(mix, c_);
    std::vector<Waveform> out;
    for (std::size_t n = 0; n < 4; ++n) {
      Spectrogram m = s;
      const double a = 0.1 * static_cast<double>(n + 1);
      for (std::size_t ch = 0; ch < m.channels(); ++ch)
        for (std::size_t t = 0; t < m.frames(); ++t)
          for (std::size_t f = 0; f < m.bins(); ++f) {
            const double g = 0.5 + a * std::cos(2.0 * std::numbers::pi * static_cast<double>(f) /
                                                 static_cast<double>(c_.fft_size));
            m.re(ch, t, f) *= g;
            m.im(ch, t, f) *= g;
          }
      out.push_back(Istft(m, c_, mix.length()));
    }
    return out;
  }

 private:
  StftConfig c_;
};

TEST(SnrDb, Examples) {
  std::mt19937_64 rng(1);
  const Waveform ref = Gaussian(rng, 2, 8000, 8000.0);
  EXPECT_DOUBLE_EQ(SnrDb(ref, ref), kSnrCapDb);
  EXPECT_NEAR(SnrDb(ref, Waveform(2, 8000, 8000.0)), 0.0, 1e-9);
  EXPECT_NEAR(SnrDb(ref, AtSnr(ref, 20.0, rng)), 20.0, 1e-6);
  // random noise at -20 dB without exact scaling stays within 0.1 dB
  const Waveform long_ref = Gaussian(rng, 2, 200000, 8000.0);
  Waveform noisy = long_ref;
  const Waveform n = Gaussian(rng, 2, 200000, 8000.0, 0.1);
  AddInPlace(noisy, n);
  EXPECT_NEAR(SnrDb(long_ref, noisy), 20.0, 0.1);
  EXPECT_THROW(SnrDb(ref, Waveform(1, 8000, 8000.0)), Error);
}

TEST(OverlapAddPlan, PartitionOfUnity) {
  for (std::size_t length : {1000u, 2400u, 2401u, 10007u, 24000u}) {
    const auto plan = OverlapAddPlan(length, 1200, 600);
    std::vector<double> sum(length, 0.0);
    for (const auto& c : plan) {
      ASSERT_EQ(c.weight.size(), c.length);
      ASSERT_LE(c.start + c.length, length);
      for (std::size_t i = 0; i < c.length; ++i) sum[c.start + i] += c.weight[i];
    }
    for (double s : sum) ASSERT_NEAR(s, 1.0, 1e-12);
  }
  const auto single = OverlapAddPlan(1000, 1200, 600);
  ASSERT_EQ(single.size(), 1u);
  for (double w : single[0].weight) EXPECT_EQ(w, 1.0);
}

TEST(OverlapAddPlan, TriangularInOverlap) {
  const auto plan = OverlapAddPlan(3600, 1200, 600);
  ASSERT_GE(plan.size(), 2u);
  // interior of the second chunk's leading overlap rises linearly
  const auto& w = plan[1].weight;
  EXPECT_LT(w[0], 0.01);
  EXPECT_NEAR(w[300], 0.5, 0.01);
  EXPECT_GT(w[599], 0.99);
}

TEST(SeparateLong, IdentityReconstructsSong) {
  std::mt19937_64 rng(2);
  const IdentitySeparator id;
  for (std::size_t len : {8000u, 30000u, 100001u}) {
    const Waveform song = Gaussian(rng, 2, len, 8000.0);
    const auto out = SeparateLong(id, song, 2.0, 1.0);
    ASSERT_EQ(out.size(), 4u);
    for (const auto& o : out) {
      ASSERT_TRUE(o.same_shape(song));
      EXPECT_LE(RelL2(song, o), 1e-6);
    }
  }
}

TEST(SeparateLong, FixedMaskMatchesSinglePass) {
  std::mt19937_64 rng(3);
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  const FixedMaskSeparator sep(c);
  const Waveform song = Gaussian(rng, 1, 58400, 8000.0);  // 7.3 s
  const auto chunked = SeparateLong(sep, song, 2.0, 1.0);
  const auto whole = sep.Separate(song);
  const std::size_t edge = 2000;  // 0.25 s
  for (std::size_t n = 0; n < 4; ++n) {
    const Waveform a = whole[n].slice(edge, song.length() - 2 * edge);
    const Waveform b = chunked[n].slice(edge, song.length() - 2 * edge);
    EXPECT_LE(RelL2(a, b), 1e-4);
  }
}

TEST(SeparateLong, ShortSongIsSinglePass) {
  std::mt19937_64 rng(4);
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  const FixedMaskSeparator sep(c);
  const Waveform song = Gaussian(rng, 1, 9000, 8000.0);
  const auto a = SeparateLong(sep, song, 2.0, 1.0), b = sep.Separate(song);
  for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(a[n], b[n]);
}

SongResult MakeSong(const std::string& name, std::mt19937_64& rng, std::size_t len,
                    const std::array<double, 4>& snr) {
  SongResult s;
  s.name = name;
  for (std::size_t k = 0; k < 4; ++k) {
    s.refs.push_back(Gaussian(rng, 1, len, 8000.0));
    s.ests.push_back(AtSnr(s.refs.back(), snr[k], rng));
  }
  return s;
}

TEST(Usdr, MeanOverSongs) {
  std::mt19937_64 rng(5);
  std::vector<SongResult> songs{MakeSong("a", rng, 8000, {6, 1, 2, 3}),
                                MakeSong("b", rng, 8000, {10, 1, 2, 3})};
  const auto u = Usdr(songs);
  EXPECT_NEAR(u[0], 8.0, 1e-6);
  EXPECT_NEAR(u[1], 1.0, 1e-6);
  songs.resize(1);
  EXPECT_NEAR(Usdr(songs)[0], 6.0, 1e-6);
  songs[0].ests = songs[0].refs;
  for (double v : Usdr(songs)) EXPECT_DOUBLE_EQ(v, kSnrCapDb);
  songs[0].ests.pop_back();
  try {
    Usdr(songs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingStem);
  }
}

TEST(ChunkSnrs, MedianOfThree) {
  std::mt19937_64 rng(6);
  const Waveform ref = Gaussian(rng, 1, 24000, 8000.0);
  Waveform est(1, 24000, 8000.0);
  const std::array<double, 3> snrs{2.0, 40.0, 5.0};
  for (std::size_t k = 0; k < 3; ++k) {
    const Waveform e = AtSnr(ref.slice(k * 8000, 8000), snrs[k], rng);
    std::copy(e.samples().begin(), e.samples().end(), est.samples().begin() + static_cast<std::ptrdiff_t>(k * 8000));
  }
  const auto c = ChunkSnrs(ref, est);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_NEAR(c[0], 2.0, 1e-6);
  EXPECT_NEAR(c[1], 40.0, 1e-5);  // eps shifts 40 dB by ~4e-6
  SongResult s;
  s.name = "x";
  for (int k = 0; k < 4; ++k) {
    s.refs.push_back(ref);
    s.ests.push_back(est);
  }
  EXPECT_NEAR(Csdr({s})[0], 5.0, 1e-6);
  s.ests = s.refs;
  EXPECT_DOUBLE_EQ(Csdr({s})[2], kSnrCapDb);
}

TEST(ChunkSnrs, SilentChunksExcluded) {
  std::mt19937_64 rng(7);
  Waveform ref = Gaussian(rng, 1, 80000, 8000.0);
  for (std::size_t k : {1u, 4u, 5u, 8u})
    for (std::size_t i = k * 8000; i < (k + 1) * 8000; ++i) ref.at(0, i) *= 1e-4;  // -80 dB
  const Waveform est = AtSnr(ref, 12.0, rng);
  EXPECT_EQ(ChunkSnrs(ref, est).size(), 6u);
  // a -50 dB chunk is above the floor
  Waveform mid = ref;
  for (std::size_t i = 1 * 8000; i < 2 * 8000; ++i) mid.at(0, i) *= 10.0 * std::sqrt(10.0);
  EXPECT_EQ(ChunkSnrs(mid, est).size(), 7u);
}

TEST(Csdr, SilentSongLeftOutThenError) {
  std::mt19937_64 rng(8);
  std::vector<SongResult> songs{MakeSong("a", rng, 16000, {4, 4, 4, 4}),
                                MakeSong("b", rng, 16000, {9, 9, 9, 9})};
  for (double& v : songs[1].refs[0].samples()) v = 0.0;
  const auto c = Csdr(songs);
  EXPECT_NEAR(c[0], 4.0, 0.5);  // only song a scores vocals
  EXPECT_NEAR(c[1], 6.5, 0.5);
  songs.erase(songs.begin());
  try {
    Csdr(songs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoScorableChunks);
  }
}

TEST(Csdr, OrderInvariant) {
  std::mt19937_64 rng(9);
  std::vector<SongResult> songs;
  for (int k = 0; k < 5; ++k)
    songs.push_back(MakeSong("s" + std::to_string(k), rng, 40000 + 8000 * k, {1.0 + k, 3.0 * k, 7.0, -2.0 + k}));
  const auto base = Csdr(songs);
  std::vector<SongResult> shuffled = songs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(Csdr(shuffled), base);
  // reverse the 1 s chunks of every song (lengths are whole seconds)
  for (auto& s : shuffled)
    for (auto* v : {&s.refs, &s.ests})
      for (auto& w : *v) {
        const std::size_t chunks = w.length() / 8000;
        Waveform r(1, w.length(), 8000.0);
        for (std::size_t k = 0; k < chunks; ++k)
          std::copy_n(w.samples().begin() + static_cast<std::ptrdiff_t>(k * 8000), 8000,
                      r.samples().begin() + static_cast<std::ptrdiff_t>((chunks - 1 - k) * 8000));
        w = r;
      }
  EXPECT_EQ(Csdr(shuffled), base);
}

TEST(Metrics, OneSecondSongAgrees) {
  std::mt19937_64 rng(10);
  const SongResult s = MakeSong("one", rng, 8000, {3.0, 7.0, 11.0, 15.0});
  const auto u = Usdr({s}), c = Csdr({s});
  for (std::size_t k = 0; k < 4; ++k) {
    const double direct = SnrDb(s.refs[k], s.ests[k]);
    EXPECT_DOUBLE_EQ(u[k], direct);
    EXPECT_DOUBLE_EQ(c[k], direct);
  }
}

TEST(Usdr, NoiseNeverHelps) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    SongResult s = MakeSong("t", rng, 4000, {5.0, 15.0, 25.0, 35.0});
    const auto before = Usdr({s});
    for (auto& e : s.ests) AddInPlace(e, Gaussian(rng, 1, 4000, 8000.0, 0.05));
    const auto after = Usdr({s});
    for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(after[k], before[k]);
  }
}

TEST(Report, RoundTripAndAverage) {
  std::mt19937_64 rng(12);
  std::vector<SongResult> songs{MakeSong("alpha", rng, 16000, {1, 2, 3, 4}),
                                MakeSong("beta", rng, 16000, {5, 6, 7, 8})};
  for (double& v : songs[1].refs[2].samples()) v = 0.0;
  ReportConfig rc{256, 64, "sqrt_hann", true, 2.0, 1.0, 1.0, -60.0, "00112233aabbccdd"};
  const EvalReport r = BuildReport(songs, EvalOptions{2.0, 1.0, 1.0, -60.0}, rc);
  double su = 0.0, sc = 0.0;
  for (const auto& s : r.stems) {
    su += s.usdr;
    sc += s.csdr;
  }
  EXPECT_NEAR(r.average.usdr, su / 4.0, 1e-9);
  EXPECT_NEAR(r.average.csdr, sc / 4.0, 1e-9);
  ASSERT_EQ(r.songs.size(), 2u);
  EXPECT_FALSE(r.songs[1].csdr[2].has_value());
  EXPECT_TRUE(r.songs[0].csdr[2].has_value());

  TempDir dir("report");
  EmitReport(r, dir / "report.json");
  EXPECT_EQ(ReadReport(dir / "report.json"), r);
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("config").at("model_checksum"), "00112233aabbccdd");
  for (const char* k : {"vocals", "bass", "drums", "other"}) EXPECT_TRUE(j.at("stems").contains(k)) << k;
  EXPECT_TRUE(j.at("average").contains("usdr"));
  EXPECT_TRUE(j.at("songs")[1].at("stems").at("drums").at("csdr").is_null());
}

TEST(EvaluateSongs, IdentityScoresEachStemAgainstMixture) {
  std::mt19937_64 rng(13);
  std::vector<StemSet> songs(2);
  for (auto& s : songs)
    for (auto& st : s.stems) st = Gaussian(rng, 1, 40000, 8000.0);
  const IdentitySeparator id;
  ReportConfig rc;
  rc.model_checksum = "feedfacecafebeef";
  const EvalReport r = EvaluateSongs(id, {"one", "two"}, songs, EvalOptions{2.0, 1.0, 1.0, -60.0}, rc);
  // four equal-power independent stems: residual is three stems, -10 log10(3)
  for (const auto& s : r.stems) EXPECT_NEAR(s.usdr, -10.0 * std::log10(3.0), 0.1);
  EXPECT_EQ(r.songs[1].name, "two");
  EXPECT_EQ(r.config.model_checksum, "feedfacecafebeef");
  EXPECT_DOUBLE_EQ(r.config.chunk_s, 2.0);
  EXPECT_THROW(EvaluateSongs(id, {"one"}, songs, {}, rc), Error);
}

}  // namespace
}  // namespace mixitkit
