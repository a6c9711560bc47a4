// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Pass a criterion number (or several) to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "../tools/commands.hpp"
#include "mixitkit/error.hpp"
#include "mixitkit/evaluation.hpp"
#include "mixitkit/mixit_loss.hpp"
#include "mixitkit/training.hpp"
#include "mixitkit/wav_io.hpp"
#include "test_util.hpp"

namespace mixitkit {
namespace {

using testing::BandNoise;
using testing::Gaussian;
using testing::RelL2;
using testing::TempDir;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- 1, 2: MixIT solvers

std::vector<Waveform> RandomSources(Rng& rng, std::size_t n, std::size_t len) {
  std::vector<Waveform> s;
  for (std::size_t k = 0; k < n; ++k) s.push_back(Gaussian(rng, 1, len, 8000.0));
  return s;
}

Outcome SolverEquivalence() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::size_t worse = 0, partition_mismatch = 0;
  double worst_gap = -1e300;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    const Waveform x1 = Gaussian(rng, 1, 256, 8000.0), x2 = Gaussian(rng, 1, 256, 8000.0);
    const auto s = RandomSources(rng, n, 256);
    const double ex = ExhaustiveMixit(x1, x2, s).loss;
    const double ef = EfficientMixit(x1, x2, s).loss;
    worst_gap = std::max(worst_gap, ex - ef);
    if (ex > ef + 1e-9) ++worse;

    // Exact partition: the sources sum to x1 and x2 under a random assignment.
    std::vector<std::uint8_t> rows(n);
    for (auto& r : rows) r = static_cast<std::uint8_t>(rng() % 2);
    rows[0] = 0;
    rows[1] = 1;
    std::shuffle(rows.begin(), rows.end(), rng);
    const MixingMatrix truth(rows);
    const auto parts = RandomSources(rng, n, 256);
    const auto mixes = Remix(truth, parts);
    const MixitResult pe = ExhaustiveMixit(mixes[0], mixes[1], parts);
    const MixitResult pf = EfficientMixit(mixes[0], mixes[1], parts);
    if (!(pe.assignment == pf.assignment) || !(pe.assignment == truth) || std::abs(pe.loss - pf.loss) > 1e-9)
      ++partition_mismatch;
  }
  const double secs = Seconds(t0);
  std::ostringstream d;
  d << "10000 instances, exhaustive > efficient+1e-9 on " << worse << ", max(ex-ef) " << worst_gap
    << ", partition mismatches " << partition_mismatch << ", " << secs << " s (limit 60)";
  return {worse == 0 && partition_mismatch == 0 && secs <= 60.0, d.str()};
}

Outcome EfficientValidity() {
  Rng rng(102);
  std::size_t invalid = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    const Waveform x1 = Gaussian(rng, 1, 256, 8000.0), x2 = Gaussian(rng, 1, 256, 8000.0);
    const auto s = RandomSources(rng, n, 256);
    const auto a_real = LeastSquaresMix(x1, x2, s);
    const MixingMatrix a = ProjectBinary(a_real);
    if (a.num_sources() != n) ++invalid;
    for (std::size_t k = 0; k < a.num_sources(); ++k)
      if (a.entry(0, k) + a.entry(1, k) != 1) {
        ++invalid;
        break;
      }
    // Residual of each mixture against the real-valued fit must be orthogonal to every source.
    for (int b = 0; b < 2; ++b) {
      Waveform r = b == 0 ? x1 : x2;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < r.length(); ++i) r.at(0, i) -= a_real(b, static_cast<Eigen::Index>(k)) * s[k].at(0, i);
      const double rn = std::sqrt(Energy(r));
      for (std::size_t k = 0; k < n; ++k)
        worst = std::max(worst, std::abs(Dot(r, s[k])) / (rn * std::sqrt(Energy(s[k]))));
    }
  }
  std::ostringstream d;
  d << "non one-hot matrices " << invalid << "/10000, max normalized |<s, residual>| " << worst << " (limit 1e-7)";
  return {invalid == 0 && worst <= 1e-7, d.str()};
}

// ---- 3

Outcome LossClosedForms() {
  Rng rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Waveform y = Gaussian(rng, 1, 1000 + 37 * static_cast<std::size_t>(trial), 8000.0, 0.1 + trial);
    const Waveform zero(1, y.length(), 8000.0);
    worst = std::max(worst, std::abs(SnrLoss(y, y, 1e-3) - (-30.0)));
    worst = std::max(worst, std::abs(SnrLoss(y, zero, 1e-3) - 10.0 * std::log10(1.0 + 1e-3)));
  }
  std::ostringstream d;
  d << "max deviation from -30 / 10log10(1+tau) " << worst << " (limit 1e-9)";
  return {worst <= 1e-9, d.str()};
}

// ---- 4

double Probe(const MaskNet& net, const Waveform& mix, const std::vector<Waveform>& u) {
  const auto out = net.Separate(mix);
  double s = 0.0;
  for (std::size_t n = 0; n < out.size(); ++n) s += Dot(out[n], u[n]);
  return s;
}

Outcome GradientExactness() {
  const auto t0 = Clock::now();
  StftConfig c;
  c.fft_size = 64;
  c.hop = 16;
  Rng rng(104);
  const double h = 1e-5;

  MaskNet net(InitParams(15, 8, 3, 1, GeometricBands(c.bins(), 4), 0.5), c);
  const Waveform mix = Gaussian(rng, 1, 1600, 8000.0);
  std::vector<Waveform> u;
  for (int n = 0; n < 3; ++n) u.push_back(Gaussian(rng, 1, 1600, 8000.0));
  const MaskNetParams grad = net.Backward(net.Forward(mix).cache, u);
  const auto gt = grad.tensors();
  double gmax = 0.0;
  for (auto t : gt)
    for (double v : t) gmax = std::max(gmax, std::abs(v));
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t t = 0; t < gt.size(); ++t) probes.emplace_back(t, rng() % gt[t].size());
  while (probes.size() < 50) {
    const std::size_t t = rng() % gt.size();
    probes.emplace_back(t, rng() % gt[t].size());
  }
  double net_err = 0.0;
  for (auto [t, i] : probes) {
    auto views = net.mutable_params().tensors();
    const double orig = views[t][i];
    views[t][i] = orig + h;
    const double fp = Probe(net, mix, u);
    views[t][i] = orig - h;
    const double fm = Probe(net, mix, u);
    views[t][i] = orig;
    const double fd = (fp - fm) / (2 * h);
    net_err = std::max(net_err, std::abs(fd - gt[t][i]) / std::max(std::abs(fd), 1e-3 * gmax));
  }

  // MixIT loss gradient with respect to the estimates, assignment held by the solver.
  double loss_err = 0.0;
  for (MixitSolver mode : {MixitSolver::kExhaustive, MixitSolver::kEfficient}) {
    const Waveform x1 = Gaussian(rng, 1, 400, 8000.0), x2 = Gaussian(rng, 1, 400, 8000.0);
    auto s = RandomSources(rng, 3, 400);
    const auto g = MixitLossGradient(x1, x2, s, 1e-3, mode);
    const MixingMatrix a = g.result.assignment;
    double lmax = 0.0;
    for (const auto& d : g.d_estimates)
      for (double v : d.samples()) lmax = std::max(lmax, std::abs(v));
    for (int p = 0; p < 50; ++p) {
      const std::size_t n = rng() % 3, i = rng() % 400;
      const double orig = s[n].at(0, i);
      s[n].at(0, i) = orig + h;
      const double fp = EvaluateAssignment(x1, x2, s, a, 1e-3).loss;
      s[n].at(0, i) = orig - h;
      const double fm = EvaluateAssignment(x1, x2, s, a, 1e-3).loss;
      s[n].at(0, i) = orig;
      const double fd = (fp - fm) / (2 * h);
      loss_err = std::max(loss_err, std::abs(fd - g.d_estimates[n].at(0, i)) / std::max(std::abs(fd), 1e-3 * lmax));
    }
  }

  double adj = 0.0;
  for (bool center : {true, false})
    for (int trial = 0; trial < 10; ++trial) {
      StftConfig a;
      a.fft_size = trial % 2 ? 128 : 256;
      a.hop = a.fft_size / (trial % 3 == 0 ? 2 : 4);
      a.window = trial % 2 ? WindowType::kHann : WindowType::kSqrtHann;
      a.center_pad = center;
      const std::size_t len = 900 + 17 * static_cast<std::size_t>(trial);
      const Waveform w = Gaussian(rng, 1, len, 8000.0);
      Spectrogram sp(1, a.num_frames(len), a.bins(), 8000.0);
      std::normal_distribution<double> n01;
      for (double& v : sp.values()) v = n01(rng);
      const double s1 = Dot(Stft(w, a), sp), s2 = Dot(w, StftAdjoint(sp, a, len));
      const double i1 = Dot(Istft(sp, a, len), w), i2 = Dot(sp, IstftAdjoint(w, a));
      const double scale = std::sqrt(Energy(w) * Dot(sp, sp));
      adj = std::max({adj, std::abs(s1 - s2) / scale, std::abs(i1 - i2) / scale});
    }
  const double secs = Seconds(t0);
  std::ostringstream d;
  d << "masknet FD rel err " << net_err << ", mixit loss FD rel err " << loss_err << " (limit 1e-5); adjoint rel "
    << adj << " (limit 1e-9); " << secs << " s (limit 120)";
  return {net_err <= 1e-5 && loss_err <= 1e-5 && adj <= 1e-9 && secs <= 120.0, d.str()};
}

// ---- 5

Outcome PerfectReconstruction() {
  Rng rng(105);
  double worst = 0.0;
  std::size_t configs = 0;
  std::uniform_int_distribution<std::size_t> len_dist(3000, 30000);
  for (std::size_t n : {16, 32, 64, 128, 256, 512, 1024, 2048, 4096})
    for (std::size_t ratio : {2, 4, 8})
      for (WindowType win : {WindowType::kHann, WindowType::kSqrtHann}) {
        StftConfig c;
        c.fft_size = n;
        c.hop = n / ratio;
        c.window = win;
        ++configs;
        for (int k = 0; k < 20; ++k) {
          const Waveform w = Gaussian(rng, 1 + k % 2, len_dist(rng), 44100.0);
          worst = std::max(worst, RelL2(w, Istft(Stft(w, c), c, w.length())));
        }
      }
  std::ostringstream d;
  d << configs << " configs x 20 signals, max relative L2 " << worst << " (limit 1e-8)";
  return {worst <= 1e-8, d.str()};
}

// ---- 6: desk-scale MixIT

constexpr double kDeskRate = 8000.0;
// Four disjoint supports, each inside one 16-bin model band of a 256-point STFT.
const std::array<std::pair<double, double>, 4> kDeskBands{
    {{94.0, 406.0}, {1094.0, 1406.0}, {2094.0, 2406.0}, {3094.0, 3406.0}}};

StftConfig DeskStft() {
  StftConfig c;
  c.fft_size = 256;
  c.hop = 64;
  return c;
}

BandSplitConfig DeskBands() { return {{16, 16, 16, 16, 16, 16, 16, 17}}; }

Waveform DeskNoise(Rng& rng, std::size_t band, std::size_t len, double gain) {
  Waveform w = BandNoise(rng, kDeskBands[band].first, kDeskBands[band].second, len, kDeskRate);
  for (double& v : w.samples()) v *= gain;
  return w;
}

// Assigns every output to one reference (several outputs may share one) so
// the mean per-reference SNR is highest. Returns the per-reference SNRs.
std::vector<double> BestAssignmentSnrs(const std::vector<Waveform>& refs, const std::vector<Waveform>& outs) {
  const std::size_t k = refs.size(), n = outs.size();
  Eigen::MatrixXd ro(k, n), oo(n, n);
  std::vector<double> rr(k);
  for (std::size_t a = 0; a < k; ++a) {
    rr[a] = Energy(refs[a]);
    for (std::size_t b = 0; b < n; ++b) ro(a, b) = Dot(refs[a], outs[b]);
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) oo(a, b) = Dot(outs[a], outs[b]);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= k;
  std::vector<double> best;
  double best_mean = -1e300;
  std::vector<std::size_t> owner(n);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= k) owner[i] = c % k;
    std::vector<double> snr(k);
    double mean = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      double err = rr[a];
      for (std::size_t i = 0; i < n; ++i) {
        if (owner[i] != a) continue;
        err -= 2.0 * ro(a, i);
        for (std::size_t j = 0; j < n; ++j)
          if (owner[j] == a) err += oo(i, j);
      }
      const double eps = 1e-10 * rr[a] + 1e-30;
      snr[a] = std::min(kSnrCapDb, 10.0 * std::log10((rr[a] + eps) / (std::max(err, 0.0) + eps)));
      mean += snr[a] / static_cast<double>(k);
    }
    if (mean > best_mean) {
      best_mean = mean;
      best = snr;
    }
  }
  return best;
}

std::vector<double> IdealBinaryMaskSnrs(const std::vector<Waveform>& refs, const Waveform& mix, const StftConfig& c) {
  const Spectrogram x = Stft(mix, c);
  std::vector<Spectrogram> r;
  for (const auto& w : refs) r.push_back(Stft(w, c));
  std::vector<double> snrs;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    Spectrogram m = x;
    for (std::size_t t = 0; t < x.frames(); ++t)
      for (std::size_t f = 0; f < x.bins(); ++f) {
        const double mine = std::hypot(r[k].re(0, t, f), r[k].im(0, t, f));
        bool dominant = true;
        for (std::size_t j = 0; j < refs.size(); ++j)
          if (j != k && std::hypot(r[j].re(0, t, f), r[j].im(0, t, f)) > mine) dominant = false;
        if (!dominant) m.re(0, t, f) = m.im(0, t, f) = 0.0;
      }
    snrs.push_back(SnrDb(refs[k], Istft(m, c, mix.length())));
  }
  return snrs;
}

double Mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Outcome DeskMixit() {
  const auto t0 = Clock::now();
  Rng rng(106);
  std::uniform_real_distribution<double> gain_db(-3.0, 3.0);
  auto gain = [&] { return std::pow(10.0, gain_db(rng) / 20.0) * 0.2; };

  // Held-out MoMs first: the oracle bound is fixed before any training.
  struct HeldOut {
    std::vector<Waveform> refs;
    Waveform mom;
  };
  const std::size_t eval_len = static_cast<std::size_t>(2.0 * kDeskRate);
  std::vector<HeldOut> held;
  std::vector<double> oracle;
  for (int e = 0; e < 24; ++e) {
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::shuffle(order.begin(), order.end(), rng);
    HeldOut h;
    for (std::size_t b = 0; b < 4; ++b) h.refs.push_back(DeskNoise(rng, b, eval_len, gain()));
    h.mom = Waveform(1, eval_len, kDeskRate);
    for (const auto& r : h.refs) AddInPlace(h.mom, r);
    for (double v : IdealBinaryMaskSnrs(h.refs, h.mom, DeskStft())) oracle.push_back(v);
    held.push_back(std::move(h));
  }
  const double oracle_db = Mean(oracle);

  // Training corpus: each track pairs two of the four supports.
  ClipStore store;
  std::vector<ClipRecord> manifest;
  const std::array<std::pair<std::size_t, std::size_t>, 6> pairs{{{0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2}}};
  const std::size_t track_len = static_cast<std::size_t>(8.0 * kDeskRate);
  for (int t = 0; t < 36; ++t) {
    const auto [a, b] = pairs[static_cast<std::size_t>(t) % pairs.size()];
    Waveform track = DeskNoise(rng, a, track_len, gain());
    AddInPlace(track, DeskNoise(rng, b, track_len, gain()));
    const std::string key = "desk_track_" + std::to_string(t);
    manifest.push_back({key, 0.0, 8.0, kDeskRate, Rms(track) * Rms(track)});
    store.AddTrack(key, std::move(track));
  }

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.seg_len_s = 1.0;
  cfg.optim.lr_peak = 3e-3;
  cfg.optim.weight_decay = 0.0;
  cfg.schedule.phase = Phase::kPretrain;
  cfg.schedule.steps_per_epoch = 200;
  cfg.schedule.warmup_steps = 100;
  cfg.schedule.pretrain_decay = 0.9;
  cfg.epochs = 10;
  cfg.seed = 106;
  MaskNet model(InitParams(cfg.seed, 16, 6, 1, DeskBands()), DeskStft());
  OptimState optim = OptimState::For(model.params(), cfg.optim);
  std::size_t skipped = 0;
  for (std::size_t step = 0; step < cfg.total_steps(); ++step)
    if (PretrainStep(model, optim, manifest, store, cfg, step).skipped) ++skipped;

  std::vector<double> snrs;
  for (const auto& h : held)
    for (double v : BestAssignmentSnrs(h.refs, model.Separate(h.mom))) snrs.push_back(v);
  const double model_db = Mean(snrs);
  const double secs = Seconds(t0);
  std::ostringstream d;
  d << cfg.total_steps() << " steps (" << skipped << " skipped), best-assignment SNR " << model_db
    << " dB, ideal binary mask " << oracle_db << " dB, ratio " << model_db / oracle_db << " (need >= 10 dB and 0.6), "
    << secs << " s (limit 900)";
  return {model_db >= 10.0 && model_db >= 0.6 * oracle_db && secs <= 900.0 && cfg.total_steps() <= 2000, d.str()};
}

// ---- 7

Outcome ChannelSelectionCorrectness() {
  const StftConfig c = DeskStft();
  const BandSplitConfig bands{{32, 32, 32, 33}};
  MaskNet model = testing::BandOracle(c, bands, {3, 7, 9, 11}, 12);
  // Every other output applies a random fixed filter to the mixture.
  Rng rng(107);
  std::uniform_real_distribution<double> re(-3.0, 0.5), im(-1.0, 1.0);
  MaskNetParams& p = model.mutable_params();
  const std::set<std::size_t> stems{3, 7, 9, 11};
  for (std::size_t q = 0; q < bands.num_bands(); ++q) {
    const std::size_t blk = p.block_rows(q);
    for (std::size_t n = 0; n < 12; ++n) {
      if (stems.count(n)) continue;
      for (std::size_t r = 0; r < blk; ++r) p.decoder_bias[q](static_cast<Eigen::Index>(n * blk + r)) = r < blk / 2 ? re(rng) : im(rng);
    }
  }
  // Five songs of four 6 s chunks; stem s lives in band s.
  const std::array<std::pair<double, double>, 4> support{{{100, 900}, {1100, 1900}, {2100, 2900}, {3100, 3900}}};
  std::vector<StemSet> val;
  const std::size_t len = static_cast<std::size_t>(24.0 * kDeskRate);
  for (int song = 0; song < 5; ++song) {
    StemSet s;
    for (std::size_t k = 0; k < kNumStems; ++k) {
      s.stems[k] = BandNoise(rng, support[k].first, support[k].second, len, kDeskRate);
      for (double& v : s.stems[k].samples()) v *= 0.1;
    }
    val.push_back(std::move(s));
  }
  const SelectionReport rep = SelectChannels(model, val, 6.0);
  const ChannelSelection want{{3, 7, 9, 11}};
  const MaskNet small = RestrictModel(model, rep.selection);
  bool bit_exact = small.num_outputs() == 4;
  for (const auto& s : val) {
    const Waveform mix = s.Mixture();
    const auto full = model.Separate(mix);
    const auto cut = small.Separate(mix);
    for (std::size_t k = 0; k < kNumStems && bit_exact; ++k)
      bit_exact = full[rep.selection.stem_to_channel[k]].samples() == cut[k].samples();
  }
  std::ostringstream d;
  const auto& m = rep.selection.stem_to_channel;
  d << rep.chunks << " chunks, map vocals:" << m[0] << " bass:" << m[1] << " drums:" << m[2] << " other:" << m[3]
    << ", restrict bit-exact " << (bit_exact ? "yes" : "no");
  return {rep.chunks == 20 && rep.selection == want && bit_exact, d.str()};
}

// ---- 8: fine-tuning

Outcome FinetuneConvergence() {
  const auto t0 = Clock::now();
  Rng rng(108);
  auto song = [&](double seconds) {
    StemSet s;
    const std::size_t len = static_cast<std::size_t>(seconds * kDeskRate);
    for (std::size_t k = 0; k < kNumStems; ++k) s.stems[k] = DeskNoise(rng, k, len, 0.2);
    return s;
  };
  std::vector<StemSet> train, test;
  for (int i = 0; i < 8; ++i) train.push_back(song(8.0));
  for (int i = 0; i < 6; ++i) test.push_back(song(4.0));

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.seg_len_s = 1.0;
  cfg.optim.lr_peak = 3e-3;
  cfg.optim.weight_decay = 0.0;
  cfg.schedule.phase = Phase::kFinetune;
  cfg.schedule.steps_per_epoch = 100;
  cfg.schedule.warmup_steps = 0;
  cfg.schedule.hold_epochs = 5;
  cfg.schedule.finetune_decay = 0.8;
  cfg.schedule.decay_every = 1;
  cfg.epochs = 10;
  cfg.mix.drop_p = 0.05;
  cfg.seed = 108;
  const StemPools pools = BuildStemPools(train, cfg.seg_len_s);
  MaskNet model(InitParams(cfg.seed, 16, 4, 1, DeskBands()), DeskStft());
  OptimState optim = OptimState::For(model.params(), cfg.optim);
  std::size_t drawn = 0, dropped = 0, skipped = 0;
  for (std::size_t step = 0; step < cfg.total_steps(); ++step) {
    const StepRecord r = FinetuneStep(model, optim, pools, cfg, step);
    drawn += r.stems_drawn;
    dropped += r.stems_dropped;
    skipped += r.skipped ? 1 : 0;
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < test.size(); ++i) names.push_back("test" + std::to_string(i));
  const EvalReport rep = EvaluateSongs(model, names, test, EvalOptions{}, ReportConfig{});
  double worst = 1e300;
  std::ostringstream d;
  d << cfg.total_steps() << " steps, uSDR";
  for (std::size_t s = 0; s < kNumStems; ++s) {
    worst = std::min(worst, rep.stems[s].usdr);
    d << " " << kStemNames[s] << " " << rep.stems[s].usdr;
  }
  const double frac = static_cast<double>(dropped) / static_cast<double>(drawn);
  d << " dB (need >= 10), dropped " << dropped << "/" << drawn << " = " << frac << " (need >= 0.01), skipped steps "
    << skipped << ", " << Seconds(t0) << " s";
  return {worst >= 10.0 && frac >= 0.01 && skipped == 0 && cfg.total_steps() <= 2000, d.str()};
}

// ---- 9: end-to-end determinism through the command line

int Cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "mixitkit");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::fprintf(stderr, "mixitkit %s failed (%d): %s\n", args[1].c_str(), code, err.str().c_str());
  return code;
}

void WriteSongs(const std::filesystem::path& root, Rng& rng, int count, double seconds) {
  const std::array<std::pair<double, double>, 4> support{{{100, 900}, {1500, 3000}, {4000, 7000}, {9000, 14000}}};
  for (int i = 0; i < count; ++i) {
    StemSet s;
    for (std::size_t k = 0; k < kNumStems; ++k) {
      s.stems[k] = BandNoise(rng, support[k].first, support[k].second, static_cast<std::size_t>(seconds * 44100.0), 44100.0);
      for (double& v : s.stems[k].samples()) v *= 0.1;
    }
    testing::WriteSong(root / ("song" + std::to_string(i)), s);
  }
}

// Runs prepare, pretrain, select-channels, finetune and evaluate under `dir`.
bool FullPipeline(const std::filesystem::path& dir) {
  Rng rng(109);  // identical inputs for both runs
  std::filesystem::create_directories(dir / "corpus");
  for (int t = 0; t < 4; ++t) {
    Waveform w = BandNoise(rng, 200.0 + 2000.0 * t, 1500.0 + 3000.0 * t, static_cast<std::size_t>(12 * 44100), 44100.0);
    for (double& v : w.samples()) v *= 0.1;
    WriteWav(dir / "corpus" / ("track" + std::to_string(t) + ".wav"), w, SampleFormat::kPcm16);
  }
  WriteSongs(dir / "val", rng, 2, 3.0);
  WriteSongs(dir / "train", rng, 2, 4.0);
  WriteSongs(dir / "test", rng, 2, 3.0);
  std::ofstream(dir / "run.cfg")
      << "seed: 9\n"
         "stft: {fft_size: 512, hop: 128}\n"
         "model: {embed_dim: 8, num_outputs: 6, num_bands: 8}\n"
         "pretrain: {steps_per_epoch: 100, epochs: 2, batch_size: 2, seg_len_s: 0.5, warmup_steps: 20,\n"
         "           checkpoint_every: 100}\n"
         "finetune: {steps_per_epoch: 100, epochs: 2, batch_size: 2, seg_len_s: 0.5, hold_epochs: 1,\n"
         "           decay_every: 1, select_chunk_s: 1}\n"
         "eval: {chunk_s: 2, hop_s: 1}\n";
  const std::string cfg = (dir / "run.cfg").string();
  auto p = [&](const char* name) { return (dir / name).string(); };
  return Cli({"--config", cfg, "prepare", "--corpus", p("corpus"), "--out", p("manifest.jsonl")}) == 0 &&
         Cli({"--config", cfg, "pretrain", "--manifest", p("manifest.jsonl"), "--out", p("pre.mxkt"), "--log",
              p("pre.jsonl")}) == 0 &&
         Cli({"--config", cfg, "select-channels", "--checkpoint", p("pre.mxkt"), "--valdir", p("val"), "--out",
              p("sel.mxkt"), "--json", p("sel.json")}) == 0 &&
         Cli({"--config", cfg, "finetune", "--checkpoint", p("sel.mxkt"), "--train-dir", p("train"), "--out",
              p("ft.mxkt"), "--log", p("ft.jsonl")}) == 0 &&
         Cli({"--config", cfg, "evaluate", "--checkpoint", p("ft.mxkt"), "--testset", p("test"), "--out",
              p("report.json")}) == 0;
}

Outcome PipelineDeterminism() {
  const auto t0 = Clock::now();
  // Both runs use the same directory since the manifest records absolute paths.
  TempDir work("accept_runs");
  const auto run = work / "run", first = work / "first";
  if (!FullPipeline(run)) return {false, "a pipeline stage failed in the first run"};
  std::filesystem::rename(run, first);
  if (!FullPipeline(run)) return {false, "a pipeline stage failed in the second run"};
  std::ostringstream d;
  bool same = true;
  for (const char* f : {"manifest.jsonl", "pre.mxkt", "pre.jsonl", "sel.mxkt", "sel.json", "ft.mxkt", "ft.jsonl",
                        "report.json"}) {
    const bool eq = testing::SameBytes(first / f, run / f);
    same = same && eq;
    if (!eq) d << f << " differs; ";
  }
  d << "8 artifacts compared, " << (same ? "all byte-identical" : "mismatch") << ", " << Seconds(t0) << " s";
  return {same, d.str()};
}

// ---- 10: metrics

Outcome MetricSuite() {
  Rng rng(110);
  std::vector<std::string> bad;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  const double sr = 1000.0;
  const Waveform ref = Gaussian(rng, 1, 10000, sr);  // 10 s
  check(SnrDb(ref, ref) == kSnrCapDb, "snr est=ref");
  check(std::abs(SnrDb(ref, Waveform(1, ref.length(), sr))) <= 1e-9, "snr est=0");
  {
    Waveform noisy = ref;
    const Waveform n = Gaussian(rng, 1, ref.length(), sr, 0.1 * std::sqrt(Energy(ref) / ref.length()));
    AddInPlace(noisy, n);
    check(std::abs(SnrDb(ref, noisy) - 20.0) <= 0.1, "snr -20 dB noise");
  }
  auto song = [&](std::vector<double> stem0_chunk_snrs, std::size_t chunk_len) {
    SongResult r;
    const std::size_t chunks = stem0_chunk_snrs.size();
    for (std::size_t s = 0; s < kNumStems; ++s) {
      Waveform w = Gaussian(rng, 1, chunks * chunk_len, sr);
      Waveform e(1, w.length(), sr);
      for (std::size_t c = 0; c < chunks; ++c) {
        const double k = 1.0 - std::pow(10.0, -stem0_chunk_snrs[c] / 20.0);
        for (std::size_t i = c * chunk_len; i < (c + 1) * chunk_len; ++i) e.at(0, i) = k * w.at(0, i);
      }
      r.refs.push_back(w);
      r.ests.push_back(e);
    }
    return r;
  };
  {
    SongResult s6 = song({6.0}, 3000), s10 = song({10.0}, 3000);
    const auto u = Usdr({s6, s10});
    check(std::abs(u[0] - 8.0) <= 1e-8, "usdr 6/10 -> 8");
    const auto one = Usdr({s6});
    check(std::abs(one[0] - SnrDb(s6.refs[0], s6.ests[0])) <= 1e-12, "usdr single song");
  }
  {
    const auto c = Csdr({song({2.0, 5.0, 40.0}, 1000)});
    check(std::abs(c[0] - 5.0) <= 1e-8, "csdr 2/5/40 -> 5");
  }
  {
    SongResult r = song({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 1000);
    for (std::size_t c : {1u, 4u, 6u, 9u})
      for (std::size_t i = c * 1000; i < (c + 1) * 1000; ++i) r.refs[0].at(0, i) = r.ests[0].at(0, i) = 0.0;
    // Scorable chunks carry SNRs 1 3 4 6 8 9 (chunk index + 1).
    check(std::abs(Csdr({r})[0] - 5.0) <= 1e-8, "csdr silent chunks excluded");
  }
  {
    class Identity : public Separator {
     public:
      std::size_t num_outputs() const override { return 4; }
      std::vector<Waveform> Separate(const Waveform& m) const override { return {m, m, m, m}; }
    } id;
    const Waveform s = Gaussian(rng, 2, static_cast<std::size_t>(40.5 * 8000), 8000.0);
    double worst = 0.0;
    for (const auto& e : SeparateLong(id, s, 12.0, 6.0)) worst = std::max(worst, RelL2(s, e));
    check(worst <= 1e-6, "overlap-add identity");
  }
  {
    std::vector<SongResult> songs;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> snrs;
      for (int c = 0; c < 7; ++c) snrs.push_back(std::uniform_real_distribution<double>(-5.0, 25.0)(rng));
      songs.push_back(song(snrs, 1000));
    }
    const auto base = Csdr(songs);
    bool invariant = true;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<SongResult> shuffled = songs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      // Permute whole 1 s chunks within every song and stem alike.
      for (auto& so : shuffled) {
        std::vector<std::size_t> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t s = 0; s < kNumStems; ++s) {
          Waveform r = so.refs[s], e = so.ests[s];
          for (std::size_t c = 0; c < 7; ++c)
            for (std::size_t i = 0; i < 1000; ++i) {
              r.at(0, c * 1000 + i) = so.refs[s].at(0, perm[c] * 1000 + i);
              e.at(0, c * 1000 + i) = so.ests[s].at(0, perm[c] * 1000 + i);
            }
          so.refs[s] = r;
          so.ests[s] = e;
        }
      }
      invariant = invariant && Csdr(shuffled) == base;
    }
    check(invariant, "csdr order invariance");
  }
  std::ostringstream d;
  if (bad.empty()) {
    d << "closed forms, overlap-add identity and order invariance hold";
  } else {
    d << "failed:";
    for (const auto& b : bad) d << " [" << b << "]";
  }
  return {bad.empty(), d.str()};
}

// ---- 11

Outcome DynamicMixStatistics() {
  Rng rng(111);
  StemPools pools;
  for (std::size_t k = 0; k < kNumStems; ++k)
    for (int i = 0; i < 3; ++i) pools[k].push_back(Gaussian(rng, 1, 4000, kDeskRate, 0.1));
  DynamicMixOptions opts;
  opts.seg_len_s = 0.1;
  opts.drop_p = 0.05;
  std::size_t draws = 0, dropped = 0;
  std::vector<double> gains;
  for (int i = 0; i < 100000; ++i) {
    const DynamicMixResult r = DynamicMix(pools, opts, rng);
    for (std::size_t k = 0; k < kNumStems; ++k) {
      ++draws;
      if (r.dropped[k]) {
        ++dropped;
      } else {
        gains.push_back(r.gains_db[k]);
      }
    }
  }
  std::sort(gains.begin(), gains.end());
  double ks = 0.0;
  const double n = static_cast<double>(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double f = std::clamp((gains[i] + 10.0) / 20.0, 0.0, 1.0);
    ks = std::max({ks, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
  }
  const double rate = static_cast<double>(dropped) / static_cast<double>(draws);
  std::ostringstream d;
  d << "100000 mixes, drop rate " << rate << " over " << draws << " stem draws (need [0.045, 0.055]), gain KS " << ks
    << " (limit 0.01)";
  return {rate >= 0.045 && rate <= 0.055 && ks <= 0.01, d.str()};
}

}  // namespace
}  // namespace mixitkit

int main(int argc, char** argv) {
  using namespace mixitkit;
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"solver oracle equivalence", SolverEquivalence},
      {"efficient solver validity", EfficientValidity},
      {"loss closed forms", LossClosedForms},
      {"gradient exactness", GradientExactness},
      {"perfect reconstruction", PerfectReconstruction},
      {"desk-scale MixIT separation", DeskMixit},
      {"channel selection correctness", ChannelSelectionCorrectness},
      {"fine-tuning convergence", FinetuneConvergence},
      {"pipeline determinism", PipelineDeterminism},
      {"metric suite", MetricSuite},
      {"dynamic-mixing statistics", DynamicMixStatistics},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s C%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
