// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "mixitkit/assignment.hpp"
#include "mixitkit/checkpoint.hpp"
#include "mixitkit/error.hpp"
#include "mixitkit/evaluation.hpp"

namespace mixitkit {
namespace {

void AddScaled(MaskNetParams& acc, const MaskNetParams& g, double scale) {
  auto dst = acc.tensors();
  const auto src = g.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t)
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * src[t][i];
}

double Quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Errors that make one batch unusable without invalidating the run.
bool SkippableStepError(ErrorKind k) {
  return k == ErrorKind::kDegenerateBatch || k == ErrorKind::kNonFiniteGradient ||
         k == ErrorKind::kZeroReference || k == ErrorKind::kZeroMixture ||
         k == ErrorKind::kSingularGram;
}

// Shared tail of both steps: clip, update, fill the record.
void ApplyUpdate(MaskNet& model, OptimState& optim, MaskNetParams& grad, const TrainConfig& cfg,
                 StepRecord& rec) {
  rec.grad_norm = ClipGradNorm(grad, cfg.clip_norm);
  AdamWStep(model.mutable_params(), grad, optim, rec.lr);
}

void WriteAtomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Keeps log lines whose step precedes `step`.
void TruncateLog(const std::filesystem::path& path, std::size_t step) {
  if (path.empty() || !std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::string kept, line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<std::size_t>() < step) kept += line + '\n';
  }
  in.close();
  WriteAtomically(path, kept);
}

void SaveAll(const std::filesystem::path& checkpoint, const MaskNet& model, const TrainingState& state) {
  auto tmp = checkpoint;
  tmp += ".tmp";
  SaveCheckpoint(tmp, model);
  std::filesystem::rename(tmp, checkpoint);
  SaveTrainingState(checkpoint, model, state);
}

template <typename StepFn>
LoopResult RunLoop(MaskNet& model, TrainingState& state, const TrainConfig& cfg,
                   const LoopOptions& opts, StepFn&& step_fn) {
  cfg.schedule.Validate();
  if (state.optim.m.size() != model.params().tensors().size())
    state.optim = OptimState::For(model.params(), cfg.optim);
  state.seed = cfg.seed;
  state.phase = cfg.schedule.phase;

  LoopResult result;
  TruncateLog(opts.log, state.step);
  std::ofstream log;
  if (!opts.log.empty()) {
    log.open(opts.log, std::ios::app);
    if (!log) throw Error(ErrorKind::kIo, "cannot append to " + opts.log.string());
  }

  const std::size_t spe = cfg.schedule.steps_per_epoch;
  const std::size_t total = cfg.total_steps();
  std::vector<StepRecord> epoch_records;
  while (state.step < total) {
    if (opts.stop_at_step && state.step >= *opts.stop_at_step) {
      result.step = state.step;
      return result;
    }
    StepRecord rec = step_fn(state.step);
    if (log) log << StepRecordJson(rec) << '\n' << std::flush;
    epoch_records.push_back(rec);
    result.records.push_back(std::move(rec));
    ++state.step;
    if (state.step % spe == 0 || state.step == total) {
      result.epochs.push_back(SummarizeEpoch((state.step - 1) / spe, epoch_records));
      const auto& e = result.epochs.back();
      spdlog::info("{} epoch {}: loss {:.3f} lr {:.3g} grad p50 {:.3g} skipped {}",
                   PhaseName(state.phase), e.epoch, e.mean_loss, e.lr, e.grad_norm_p50, e.skipped);
      epoch_records.clear();
    }
    if (!opts.checkpoint.empty() && opts.checkpoint_every > 0 &&
        state.step % opts.checkpoint_every == 0 && state.step < total)
      SaveAll(opts.checkpoint, model, state);
  }
  if (!opts.checkpoint.empty()) SaveAll(opts.checkpoint, model, state);
  result.step = state.step;
  result.completed = true;
  return result;
}

}  // namespace

OptimState OptimState::For(const MaskNetParams& params, const AdamWConfig& hyper) {
  OptimState s;
  s.hyper = hyper;
  for (auto t : params.tensors()) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void AdamWStep(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads,
               OptimState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw Error(ErrorKind::kShapeMismatch, "optimizer tensor count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t)
    if (params[t].size() != grads[t].size() || params[t].size() != state.m[t].size() ||
        params[t].size() != state.v[t].size())
      throw Error(ErrorKind::kShapeMismatch, "optimizer tensor " + std::to_string(t) + " shape mismatch");

  const AdamWConfig& h = state.hyper;
  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + h.eps);
      params[t][i] -= lr * (update + h.weight_decay * params[t][i]);
    }
  }
}

void AdamWStep(MaskNetParams& params, const MaskNetParams& grads, OptimState& state, double lr) {
  AdamWStep(params.tensors(), grads.tensors(), state, lr);
}

const char* PhaseName(Phase p) { return p == Phase::kPretrain ? "pretrain" : "finetune"; }

void SchedulePhase::Validate() const {
  auto in_range = [](double d) { return d > 0.0 && d <= 1.0; };
  if (steps_per_epoch == 0) throw Error(ErrorKind::kConfig, "steps_per_epoch must be positive");
  if (!in_range(pretrain_decay) || !in_range(finetune_decay))
    throw Error(ErrorKind::kConfig, "decay factors must lie in (0, 1]");
  if (decay_every == 0) throw Error(ErrorKind::kConfig, "decay_every must be positive");
}

double LrAt(std::size_t step, std::size_t epoch, const SchedulePhase& phase, double lr_peak) {
  if (step < phase.warmup_steps)
    return lr_peak * static_cast<double>(step) / static_cast<double>(phase.warmup_steps);
  if (phase.phase == Phase::kPretrain) {
    const std::size_t warm_epochs = phase.warmup_steps / phase.steps_per_epoch;
    const std::size_t decays = epoch > warm_epochs ? epoch - warm_epochs : 0;
    return lr_peak * std::pow(phase.pretrain_decay, static_cast<double>(decays));
  }
  if (epoch < phase.hold_epochs) return lr_peak;
  const std::size_t decays = (epoch - phase.hold_epochs) / phase.decay_every;
  return lr_peak * std::pow(phase.finetune_decay, static_cast<double>(decays));
}

double ClipGradNorm(std::vector<std::span<double>> grads, double max_norm) {
  double sq = 0.0;
  for (auto t : grads)
    for (double g : t) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorKind::kNonFiniteGradient, "gradient norm is not finite");
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto t : grads)
      for (double& g : t) g *= scale;
  }
  return norm;
}

double ClipGradNorm(MaskNetParams& grads, double max_norm) { return ClipGradNorm(grads.tensors(), max_norm); }

std::string StepRecordJson(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["loss"] = r.skipped ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.loss);
  j["grad_norm"] = r.skipped ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.grad_norm);
  if (r.skipped) j["skipped"] = r.note;
  if (r.stems_drawn > 0) {
    j["stems_drawn"] = r.stems_drawn;
    j["stems_dropped"] = r.stems_dropped;
  }
  return j.dump();
}

EpochStats SummarizeEpoch(std::size_t epoch, std::span<const StepRecord> steps) {
  EpochStats e;
  e.epoch = epoch;
  e.steps = steps.size();
  std::vector<double> norms;
  double loss_sum = 0.0;
  for (const auto& r : steps) {
    e.lr = r.lr;
    e.stems_drawn += r.stems_drawn;
    e.stems_dropped += r.stems_dropped;
    if (r.skipped) {
      ++e.skipped;
      continue;
    }
    loss_sum += r.loss;
    norms.push_back(r.grad_norm);
  }
  const std::size_t used = e.steps - e.skipped;
  e.mean_loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
  e.grad_norm_p50 = Quantile(norms, 0.5);
  e.grad_norm_p90 = Quantile(norms, 0.9);
  e.grad_norm_max = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  return e;
}

Rng StepRng(std::uint64_t seed, Phase phase, std::size_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(phase == Phase::kPretrain ? 1 : 2),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return Rng(seq);
}

StepRecord PretrainStep(MaskNet& model, OptimState& optim, const std::vector<ClipRecord>& manifest,
                        ClipStore& store, const TrainConfig& cfg, std::size_t step) {
  if (model.num_outputs() < 2) throw Error(ErrorKind::kIncompatibleConfig, "pre-training needs N >= 2");
  StepRecord rec;
  rec.step = step;
  rec.epoch = step / cfg.schedule.steps_per_epoch;
  rec.lr = LrAt(step, rec.epoch, cfg.schedule, cfg.optim.lr_peak);
  Rng rng = StepRng(cfg.seed, Phase::kPretrain, step);
  try {
    const MomBatch batch = BuildMomBatch(manifest, store, cfg.batch_size, cfg.seg_len_s, rng);
    MaskNetParams grad = model.params().ZerosLike();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto fwd = model.Forward(batch.mom[b]);
      const auto g = MixitLossGradient(batch.x1[b], batch.x2[b], fwd.estimates, cfg.tau, cfg.solver);
      rec.loss += inv_b * g.result.loss;
      AddScaled(grad, model.Backward(fwd.cache, g.d_estimates), inv_b);
    }
    ApplyUpdate(model, optim, grad, cfg, rec);
  } catch (const Error& e) {
    if (!SkippableStepError(e.kind())) throw;
    rec.skipped = true;
    rec.note = std::string(ErrorKindName(e.kind()));
    spdlog::warn("pretrain step {} skipped: {}", step, e.what());
  }
  return rec;
}

double FinetuneLoss(const StemSet& refs, std::span<const Waveform> estimates, const Waveform& mixture,
                    double tau) {
  if (estimates.size() != kNumStems)
    throw Error(ErrorKind::kShapeMismatch, "expected 4 estimates, got " + std::to_string(estimates.size()));
  double loss = 0.0;
  for (std::size_t s = 0; s < kNumStems; ++s)
    loss += SnrLossZeroAware(refs.stems[s], estimates[s], mixture, tau);
  return loss;
}

StepRecord FinetuneStep(MaskNet& model, OptimState& optim, const StemPools& pools,
                        const TrainConfig& cfg, std::size_t step) {
  if (model.num_outputs() != kNumStems)
    throw Error(ErrorKind::kIncompatibleConfig, "fine-tuning needs a 4-output model, got " +
                                                    std::to_string(model.num_outputs()));
  StepRecord rec;
  rec.step = step;
  rec.epoch = step / cfg.schedule.steps_per_epoch;
  rec.lr = LrAt(step, rec.epoch, cfg.schedule, cfg.optim.lr_peak);
  Rng rng = StepRng(cfg.seed, Phase::kFinetune, step);
  DynamicMixOptions mix = cfg.mix;
  mix.seg_len_s = cfg.seg_len_s;
  try {
    MaskNetParams grad = model.params().ZerosLike();
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const DynamicMixResult dm = DynamicMix(pools, mix, rng);
      rec.stems_drawn += kNumStems;
      rec.stems_dropped += static_cast<std::size_t>(std::count(dm.dropped.begin(), dm.dropped.end(), true));
      const auto fwd = model.Forward(dm.mixture);
      rec.loss += inv_b * FinetuneLoss(dm.references, fwd.estimates, dm.mixture, cfg.tau);
      std::vector<Waveform> upstream;
      for (std::size_t s = 0; s < kNumStems; ++s)
        upstream.push_back(
            SnrLossZeroAwareGradient(dm.references.stems[s], fwd.estimates[s], dm.mixture, cfg.tau));
      AddScaled(grad, model.Backward(fwd.cache, upstream), inv_b);
    }
    ApplyUpdate(model, optim, grad, cfg, rec);
  } catch (const Error& e) {
    if (!SkippableStepError(e.kind())) throw;
    rec.skipped = true;
    rec.note = std::string(ErrorKindName(e.kind()));
    spdlog::warn("finetune step {} skipped: {}", step, e.what());
  }
  return rec;
}

EpochStats PretrainEpoch(MaskNet& model, OptimState& optim, const std::vector<ClipRecord>& manifest,
                         ClipStore& store, const TrainConfig& cfg, std::size_t epoch,
                         std::vector<StepRecord>* log) {
  std::vector<StepRecord> records;
  const std::size_t spe = cfg.schedule.steps_per_epoch;
  for (std::size_t s = epoch * spe; s < (epoch + 1) * spe; ++s)
    records.push_back(PretrainStep(model, optim, manifest, store, cfg, s));
  if (log) log->insert(log->end(), records.begin(), records.end());
  return SummarizeEpoch(epoch, records);
}

EpochStats FinetuneEpoch(MaskNet& model, OptimState& optim, const StemPools& pools,
                         const TrainConfig& cfg, std::size_t epoch, std::vector<StepRecord>* log) {
  std::vector<StepRecord> records;
  const std::size_t spe = cfg.schedule.steps_per_epoch;
  for (std::size_t s = epoch * spe; s < (epoch + 1) * spe; ++s)
    records.push_back(FinetuneStep(model, optim, pools, cfg, s));
  if (log) log->insert(log->end(), records.begin(), records.end());
  return SummarizeEpoch(epoch, records);
}

std::filesystem::path StatePath(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".state.json";
  return p;
}

std::filesystem::path MomentsPath(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".adam";
  return p;
}

void SaveTrainingState(const std::filesystem::path& checkpoint, const MaskNet& model,
                       const TrainingState& state) {
  std::vector<std::vector<double>> moments = state.optim.m;
  moments.insert(moments.end(), state.optim.v.begin(), state.optim.v.end());
  auto tmp = MomentsPath(checkpoint);
  tmp += ".tmp";
  SaveTensorFile(tmp, moments);
  std::filesystem::rename(tmp, MomentsPath(checkpoint));

  const auto& h = state.optim.hyper;
  nlohmann::ordered_json j;
  j["phase"] = PhaseName(state.phase);
  j["step"] = state.step;
  j["seed"] = state.seed;
  j["optimizer_step"] = state.optim.step;
  j["lr_peak"] = h.lr_peak;
  j["beta1"] = h.beta1;
  j["beta2"] = h.beta2;
  j["eps"] = h.eps;
  j["weight_decay"] = h.weight_decay;
  j["params_fingerprint"] = ChecksumHex(model.params().Fingerprint());
  j["moments"] = MomentsPath(checkpoint).filename().string();
  WriteAtomically(StatePath(checkpoint), j.dump(2) + "\n");
}

TrainingState LoadTrainingState(const std::filesystem::path& checkpoint, const MaskNet& model) {
  std::ifstream in(StatePath(checkpoint));
  if (!in) throw Error(ErrorKind::kBadCheckpoint, "no training state next to " + checkpoint.string());
  TrainingState s;
  try {
    const auto j = nlohmann::json::parse(in);
    const std::string phase = j.at("phase").get<std::string>();
    if (phase != "pretrain" && phase != "finetune") throw std::runtime_error("unknown phase " + phase);
    s.phase = phase == "pretrain" ? Phase::kPretrain : Phase::kFinetune;
    s.step = j.at("step").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.optim.step = j.at("optimizer_step").get<std::uint64_t>();
    s.optim.hyper.lr_peak = j.at("lr_peak").get<double>();
    s.optim.hyper.beta1 = j.at("beta1").get<double>();
    s.optim.hyper.beta2 = j.at("beta2").get<double>();
    s.optim.hyper.eps = j.at("eps").get<double>();
    s.optim.hyper.weight_decay = j.at("weight_decay").get<double>();
    if (j.at("params_fingerprint").get<std::string>() != ChecksumHex(model.params().Fingerprint()))
      throw std::runtime_error("state does not belong to this checkpoint");
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kBadCheckpoint, StatePath(checkpoint).string() + ": " + e.what());
  }
  auto moments = LoadTensorFile(MomentsPath(checkpoint));
  const auto tensors = model.params().tensors();
  if (moments.size() != 2 * tensors.size())
    throw Error(ErrorKind::kBadCheckpoint, "moment file does not match the model");
  for (std::size_t t = 0; t < tensors.size(); ++t)
    if (moments[t].size() != tensors[t].size() || moments[t + tensors.size()].size() != tensors[t].size())
      throw Error(ErrorKind::kBadCheckpoint, "moment tensor " + std::to_string(t) + " shape mismatch");
  s.optim.m.assign(moments.begin(), moments.begin() + static_cast<std::ptrdiff_t>(tensors.size()));
  s.optim.v.assign(moments.begin() + static_cast<std::ptrdiff_t>(tensors.size()), moments.end());
  return s;
}

LoopResult RunPretraining(MaskNet& model, TrainingState& state,
                          const std::vector<ClipRecord>& manifest, ClipStore& store,
                          const TrainConfig& cfg, const LoopOptions& opts) {
  if (cfg.schedule.phase != Phase::kPretrain)
    throw Error(ErrorKind::kConfig, "pre-training needs a pretrain schedule");
  return RunLoop(model, state, cfg, opts, [&](std::size_t step) {
    return PretrainStep(model, state.optim, manifest, store, cfg, step);
  });
}

LoopResult RunFinetuning(MaskNet& model, TrainingState& state, const StemPools& pools,
                         const TrainConfig& cfg, const LoopOptions& opts) {
  if (cfg.schedule.phase != Phase::kFinetune)
    throw Error(ErrorKind::kConfig, "fine-tuning needs a finetune schedule");
  return RunLoop(model, state, cfg, opts, [&](std::size_t step) {
    return FinetuneStep(model, state.optim, pools, cfg, step);
  });
}

StemAssignment BestAssignment(std::span<const Waveform> estimates, std::span<const Waveform> refs) {
  if (refs.size() != kNumStems)
    throw Error(ErrorKind::kShapeMismatch, "expected 4 references, got " + std::to_string(refs.size()));
  if (estimates.size() < refs.size())
    throw Error(ErrorKind::kShapeMismatch, "fewer estimates than references");
  StemAssignment out;
  out.snr.resize(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(estimates.size()));
  for (std::size_t s = 0; s < refs.size(); ++s)
    for (std::size_t c = 0; c < estimates.size(); ++c) {
      CheckSameShape(refs[s], estimates[c], "best_assignment");
      out.snr(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = SnrDb(refs[s], estimates[c]);
    }
  const Assignment a = MaxScoreAssignment(out.snr);
  for (std::size_t s = 0; s < kNumStems; ++s) out.channel_of_stem[s] = a.column_of_row[s];
  out.total = a.total;
  return out;
}

void ChannelSelection::Validate(std::size_t num_outputs) const {
  for (std::size_t s = 0; s < kNumStems; ++s) {
    if (stem_to_channel[s] >= num_outputs)
      throw Error(ErrorKind::kInvalidSelection, std::string(kStemNames[s]) + " -> channel " +
                                                    std::to_string(stem_to_channel[s]) + " out of range");
    for (std::size_t t = 0; t < s; ++t)
      if (stem_to_channel[t] == stem_to_channel[s])
        throw Error(ErrorKind::kInvalidSelection, "channel " + std::to_string(stem_to_channel[s]) +
                                                      " selected twice");
  }
}

ChannelSelection ResolveSelection(const Eigen::MatrixXi& counts) {
  if (counts.rows() != static_cast<Eigen::Index>(kNumStems) || counts.cols() < counts.rows())
    throw Error(ErrorKind::kInvalidSelection, "vote table must be 4 x N with N >= 4");
  ChannelSelection sel;
  std::array<bool, kNumStems> stem_done{};
  std::vector<bool> claimed(static_cast<std::size_t>(counts.cols()), false);
  for (std::size_t round = 0; round < kNumStems; ++round) {
    int best_count = -1;
    std::size_t best_stem = 0, best_channel = 0;
    for (std::size_t s = 0; s < kNumStems; ++s) {
      if (stem_done[s]) continue;
      for (std::size_t c = 0; c < claimed.size(); ++c) {
        if (claimed[c]) continue;
        const int n = counts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c));
        if (n > best_count) {
          best_count = n;
          best_stem = s;
          best_channel = c;
        }
      }
    }
    stem_done[best_stem] = true;
    claimed[best_channel] = true;
    sel.stem_to_channel[best_stem] = best_channel;
  }
  return sel;
}

SelectionReport SelectChannels(const Separator& model, const std::vector<StemSet>& validation,
                               double chunk_s) {
  if (validation.empty()) throw Error(ErrorKind::kEmptyValidation, "no validation songs");
  const std::size_t n = model.num_outputs();
  if (n < kNumStems) throw Error(ErrorKind::kInvalidSelection, "model has fewer than 4 outputs");
  SelectionReport report;
  report.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(kNumStems), static_cast<Eigen::Index>(n));
  for (const auto& song : validation) {
    song.Validate();
    const Waveform mixture = song.Mixture();
    const std::size_t len = mixture.length();
    const auto chunk = static_cast<std::size_t>(std::llround(chunk_s * mixture.sample_rate()));
    if (chunk == 0) throw Error(ErrorKind::kShapeMismatch, "chunk_s too small");
    std::vector<std::size_t> starts;
    if (len <= chunk) {
      if (len > 0) starts.push_back(0);
    } else {
      for (std::size_t b = 0; b + chunk <= len; b += chunk) starts.push_back(b);
    }
    for (std::size_t b : starts) {
      const std::size_t count = std::min(chunk, len - b);
      const Waveform mix = mixture.slice(b, count);
      std::vector<Waveform> refs;
      for (const auto& stem : song.stems) refs.push_back(stem.slice(b, count));
      const auto ests = model.Separate(mix);
      const StemAssignment a = BestAssignment(ests, refs);
      for (std::size_t s = 0; s < kNumStems; ++s)
        if (Energy(refs[s]) > 0.0)
          ++report.counts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a.channel_of_stem[s]));
      ++report.chunks;
    }
  }
  if (report.chunks == 0) throw Error(ErrorKind::kEmptyValidation, "validation songs are empty");
  report.selection = ResolveSelection(report.counts);
  return report;
}

MaskNet RestrictModel(const MaskNet& model, const ChannelSelection& selection) {
  selection.Validate(model.num_outputs());
  return MaskNet(RestrictOutputs(model.params(), selection.stem_to_channel), model.stft());
}

}  // namespace mixitkit
