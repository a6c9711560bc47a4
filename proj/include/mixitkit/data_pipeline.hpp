// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Corpus preparation (segmentation, silence filtering, sample-rate gating),
// mixture-of-mixtures batches for unsupervised pre-training and dynamic
// mixing for supervised fine-tuning.

#ifndef MIXITKIT_DATA_PIPELINE_HPP_
#define MIXITKIT_DATA_PIPELINE_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mixitkit/audio.hpp"

namespace mixitkit {

using Rng = std::mt19937_64;

struct ClipRecord {
  std::string source_path;
  double offset_s = 0.0;
  double duration_s = 0.0;
  double sample_rate = 0.0;
  double mean_power = 0.0;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

// JSON lines, one record per line, snake_case keys.
void WriteManifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);
std::vector<ClipRecord> ReadManifest(const std::filesystem::path& path);
std::string ManifestLine(const ClipRecord& r);

// Offsets (in samples) of every full window that fits in `length` samples.
std::vector<std::size_t> WindowOffsets(std::size_t length, std::size_t clip, std::size_t hop);

// Window arithmetic per track from the WAV header. Unreadable files are
// skipped with a warning. mean_power is left at 0; PrepareCorpus fills it.
std::vector<ClipRecord> SegmentCorpus(const std::vector<std::filesystem::path>& tracks,
                                      double clip_len_s = 10.0, double hop_s = 5.0);

struct SilenceDecision {
  bool keep = true;
  double silent_s = 0.0;
};

// An interval is silent when its power is at most silence_db below the
// loudest interval; the clip is dropped when the silent total exceeds max_silent_s.
SilenceDecision SilenceFilter(const Waveform& clip, double interval_s = 1.0,
                              double silence_db = -50.0, double max_silent_s = 5.0);

struct GateDecision {
  bool accept = false;
  std::string reason;
};

inline constexpr double kTargetSampleRate = 44100.0;

// Accepts exactly 44.1 kHz; lower rates are rejected as too low, higher ones
// because this toolkit does not resample.
GateDecision SampleRateGate(double sample_rate);

struct PrepareOptions {
  double clip_len_s = 10.0;
  double hop_s = 5.0;
  double interval_s = 1.0;
  double silence_db = -50.0;
  double max_silent_s = 5.0;
};

struct PrepareResult {
  std::vector<ClipRecord> kept;
  std::size_t tracks_seen = 0;
  std::size_t tracks_rejected = 0;
  std::size_t clips_silent = 0;
  std::vector<std::string> log;
};

PrepareResult PrepareCorpus(const std::vector<std::filesystem::path>& tracks,
                            const PrepareOptions& opts);

// Sorted recursive listing of *.wav files.
std::vector<std::filesystem::path> ListWavFiles(const std::filesystem::path& dir);

// Loads clip audio from the referenced files, caching whole tracks. Tracks can
// also be registered from memory under any path key.
class ClipStore {
 public:
  void AddTrack(const std::string& path, Waveform audio);
  const Waveform& Track(const std::string& path);
  Waveform Load(const ClipRecord& clip);

 private:
  std::map<std::string, Waveform> tracks_;
};

struct MomBatch {
  std::vector<Waveform> x1;
  std::vector<Waveform> x2;
  std::vector<Waveform> mom;
  std::vector<std::array<std::string, 2>> sources;

  std::size_t size() const { return mom.size(); }
};

// Uniform random window of `samples` samples. Throws InsufficientData if the clip is shorter.
Waveform RandomCrop(const Waveform& clip, std::size_t samples, Rng& rng);

// Draws 2B distinct clips, pairing clips from different tracks, crops each
// to seg_len_s and sums each pair.
MomBatch BuildMomBatch(const std::vector<ClipRecord>& manifest, ClipStore& store,
                       std::size_t batch_size, double seg_len_s, Rng& rng);

enum Stem : std::size_t { kVocals = 0, kBass = 1, kDrums = 2, kOther = 3 };
inline constexpr std::size_t kNumStems = 4;
inline constexpr std::array<std::string_view, kNumStems> kStemNames{"vocals", "bass", "drums",
                                                                      "other"};

struct StemSet {
  std::array<Waveform, kNumStems> stems;

  Waveform Mixture() const;
  // Throws ShapeMismatch unless every stem shares a shape.
  void Validate() const;
};

// One song directory holding vocals.wav, bass.wav, drums.wav and other.wav.
StemSet LoadStemSet(const std::filesystem::path& dir);
// Sorted subdirectories of `root` that contain all four stem files.
std::vector<std::filesystem::path> ListSongDirs(const std::filesystem::path& root);

using StemPools = std::array<std::vector<Waveform>, kNumStems>;

struct DynamicMixOptions {
  double seg_len_s = 6.0;
  double drop_p = 0.05;
  double gain_db = 10.0;  // gains uniform on [-gain_db, gain_db]
  int max_retries = 8;
};

struct DynamicMixResult {
  Waveform mixture;
  StemSet references;
  std::array<double, kNumStems> gains_db{};
  std::array<bool, kNumStems> dropped{};
  int attempts = 0;
};

// Each stem: random clip, random crop, RMS-normalize, random gain, dropped to
// exact zeros with probability drop_p. A silent mixture is redrawn up to
// max_retries times, then DegenerateBatch is thrown.
DynamicMixResult DynamicMix(const StemPools& pools, const DynamicMixOptions& opts, Rng& rng);

struct ActivitySpan {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SadOptions {
  double frame_s = 0.5;
  double on_db = -35.0;
  double off_db = -45.0;
  double merge_gap_s = 0.5;
};

// Hysteresis energy detector. Frame powers are measured against the median
// power of frames within on_db of the loudest frame; a span opens at on_db and
// closes below off_db. Spans separated by at most merge_gap_s are merged.
std::vector<ActivitySpan> SourceActivityDetect(const Waveform& stem, const SadOptions& opts = {});

// Stem pools from whole songs, or from their active spans of at least
// seg_len_s when `sad` is given.
StemPools BuildStemPools(const std::vector<StemSet>& songs, double seg_len_s,
                         const SadOptions* sad = nullptr);

}  // namespace mixitkit

#endif  // MIXITKIT_DATA_PIPELINE_HPP_
