// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// AdamW, learning-rate schedules, gradient clipping, the MixIT pre-training
// loop, supervised fine-tuning with fixed stem targets and channel selection.

#ifndef MIXITKIT_TRAINING_HPP_
#define MIXITKIT_TRAINING_HPP_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixitkit/data_pipeline.hpp"
#include "mixitkit/masknet.hpp"
#include "mixitkit/mixit_loss.hpp"

namespace mixitkit {

struct AdamWConfig {
  double lr_peak = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
  AdamWConfig hyper;

  static OptimState For(const MaskNetParams& params, const AdamWConfig& hyper);
};

// p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p). Throws ShapeMismatch.
void AdamWStep(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads,
               OptimState& state, double lr);
void AdamWStep(MaskNetParams& params, const MaskNetParams& grads, OptimState& state, double lr);

enum class Phase { kPretrain, kFinetune };
const char* PhaseName(Phase p);

struct SchedulePhase {
  Phase phase = Phase::kPretrain;
  std::size_t steps_per_epoch = 1000;
  std::size_t warmup_steps = 5000;
  double pretrain_decay = 0.965;
  std::size_t hold_epochs = 550;
  double finetune_decay = 0.98;
  std::size_t decay_every = 2;

  // Throws Config on decay outside (0, 1] or zero-sized epochs.
  void Validate() const;
};

// Linear warmup from 0 over warmup_steps in both phases. Pre-training then
// decays once per epoch end after warmup; fine-tuning holds the peak until
// hold_epochs and decays by finetune_decay every decay_every epochs.
double LrAt(std::size_t step, std::size_t epoch, const SchedulePhase& phase, double lr_peak);

// Scales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm. Throws NonFiniteGradient.
double ClipGradNorm(std::vector<std::span<double>> grads, double max_norm = 5.0);
double ClipGradNorm(MaskNetParams& grads, double max_norm = 5.0);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  double seg_len_s = 6.0;
  AdamWConfig optim;
  SchedulePhase schedule;
  double clip_norm = 5.0;
  double tau = kDefaultTau;
  MixitSolver solver = MixitSolver::kEfficient;
  DynamicMixOptions mix;  // fine-tuning only
  std::uint64_t seed = 0;

  std::size_t total_steps() const { return epochs * schedule.steps_per_epoch; }
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
  std::string note;
  std::size_t stems_drawn = 0;
  std::size_t stems_dropped = 0;
};

std::string StepRecordJson(const StepRecord& r);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  std::size_t skipped = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // rate of the last step
  double grad_norm_p50 = 0.0;
  double grad_norm_p90 = 0.0;
  double grad_norm_max = 0.0;
  std::size_t stems_drawn = 0;
  std::size_t stems_dropped = 0;
};

EpochStats SummarizeEpoch(std::size_t epoch, std::span<const StepRecord> steps);

// Every step draws from its own stream, so any step can be replayed without
// saved generator state.
Rng StepRng(std::uint64_t seed, Phase phase, std::size_t step);

// Summed zero-aware SNR loss of the four stem estimates.
double FinetuneLoss(const StemSet& refs, std::span<const Waveform> estimates, const Waveform& mixture,
                    double tau = kDefaultTau);

// One optimizer step at global index `step`. A degenerate batch or a
// non-finite gradient skips the update and is reported in the record.
StepRecord PretrainStep(MaskNet& model, OptimState& optim, const std::vector<ClipRecord>& manifest,
                        ClipStore& store, const TrainConfig& cfg, std::size_t step);
StepRecord FinetuneStep(MaskNet& model, OptimState& optim, const StemPools& pools,
                        const TrainConfig& cfg, std::size_t step);

// Runs steps [epoch * steps_per_epoch, (epoch + 1) * steps_per_epoch).
EpochStats PretrainEpoch(MaskNet& model, OptimState& optim, const std::vector<ClipRecord>& manifest,
                         ClipStore& store, const TrainConfig& cfg, std::size_t epoch,
                         std::vector<StepRecord>* log = nullptr);
EpochStats FinetuneEpoch(MaskNet& model, OptimState& optim, const StemPools& pools,
                         const TrainConfig& cfg, std::size_t epoch,
                         std::vector<StepRecord>* log = nullptr);

// Training state next to a checkpoint: <ckpt>.state.json holds the phase,
// step, seed and optimizer hyperparameters; <ckpt>.adam holds the moments.
struct TrainingState {
  Phase phase = Phase::kPretrain;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  OptimState optim;
};

std::filesystem::path StatePath(const std::filesystem::path& checkpoint);
std::filesystem::path MomentsPath(const std::filesystem::path& checkpoint);
void SaveTrainingState(const std::filesystem::path& checkpoint, const MaskNet& model,
                       const TrainingState& state);
// Throws BadCheckpoint if the sidecar does not match the checkpoint.
TrainingState LoadTrainingState(const std::filesystem::path& checkpoint, const MaskNet& model);

struct LoopOptions {
  std::filesystem::path checkpoint;  // written periodically and at the end
  std::filesystem::path log;         // JSON lines; empty disables
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  std::optional<std::size_t> stop_at_step;  // abandon the run here, as if killed
};

struct LoopResult {
  std::size_t step = 0;  // steps completed
  bool completed = false;
  std::vector<EpochStats> epochs;
  std::vector<StepRecord> records;
};

// Runs from `state.step` to cfg.total_steps(). On a resumed run, log lines at
// or past the resume step are dropped before appending.
LoopResult RunPretraining(MaskNet& model, TrainingState& state,
                          const std::vector<ClipRecord>& manifest, ClipStore& store,
                          const TrainConfig& cfg, const LoopOptions& opts);
LoopResult RunFinetuning(MaskNet& model, TrainingState& state, const StemPools& pools,
                         const TrainConfig& cfg, const LoopOptions& opts);

struct StemAssignment {
  std::array<std::size_t, kNumStems> channel_of_stem{};
  Eigen::MatrixXd snr;  // stems x channels, dB
  double total = 0.0;
};

// Injective stem -> channel map maximizing the summed SNR. Ties go to the
// lowest channel index. Requires at least as many estimates as references.
StemAssignment BestAssignment(std::span<const Waveform> estimates, std::span<const Waveform> refs);

struct ChannelSelection {
  std::array<std::size_t, kNumStems> stem_to_channel{};

  // Throws InvalidSelection unless the indices are distinct and below n.
  void Validate(std::size_t num_outputs) const;
  friend bool operator==(const ChannelSelection&, const ChannelSelection&) = default;
};

struct SelectionReport {
  ChannelSelection selection;
  Eigen::MatrixXi counts;  // stems x channels
  std::size_t chunks = 0;
};

// Votes per stem come from chunks where that stem's reference is audible.
// Each round assigns the open stem whose best unclaimed channel has the
// highest count; equal counts go to the earlier stem and the lower channel.
ChannelSelection ResolveSelection(const Eigen::MatrixXi& counts);

// Non-overlapping chunks of chunk_s seconds; a song shorter than one chunk is
// used whole and partial tails are dropped. Throws EmptyValidation.
SelectionReport SelectChannels(const Separator& model, const std::vector<StemSet>& validation,
                               double chunk_s = 6.0);

// Keeps the selected outputs in stem order.
MaskNet RestrictModel(const MaskNet& model, const ChannelSelection& selection);

}  // namespace mixitkit

#endif  // MIXITKIT_TRAINING_HPP_
