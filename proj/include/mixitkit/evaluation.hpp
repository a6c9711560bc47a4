// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Chunked overlap-add inference, SNR-based uSDR/cSDR metrics and the JSON
// evaluation report.

#ifndef MIXITKIT_EVALUATION_HPP_
#define MIXITKIT_EVALUATION_HPP_

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mixitkit/data_pipeline.hpp"
#include "mixitkit/separator.hpp"

namespace mixitkit {

inline constexpr double kSnrCapDb = 100.0;

// 10 log10((|ref|^2 + eps) / (|ref - est|^2 + eps)) with eps = 1e-10 |ref|^2 + 1e-30,
// capped at kSnrCapDb.
double SnrDb(const Waveform& ref, const Waveform& est);

struct OverlapChunk {
  std::size_t start = 0;
  std::size_t length = 0;
  std::vector<double> weight;  // per sample of the chunk
};

// Chunk grid on a hop grid with linear cross-fades over each overlap. The
// weights are normalized so they sum to one at every sample of the song.
std::vector<OverlapChunk> OverlapAddPlan(std::size_t length, std::size_t chunk, std::size_t hop);

// Separates each chunk independently and blends with OverlapAddPlan. Songs no
// longer than one chunk get a single pass.
std::vector<Waveform> SeparateLong(const Separator& model, const Waveform& song,
                                   double chunk_s = 12.0, double hop_s = 6.0);

struct SongResult {
  std::string name;
  std::vector<Waveform> refs;  // vocals, bass, drums, other
  std::vector<Waveform> ests;
};

// Per-chunk SNRs over non-overlapping chunks, skipping chunks whose reference
// energy is more than -silence_floor_db below the loudest chunk. A song
// shorter than one chunk is a single chunk.
std::vector<double> ChunkSnrs(const Waveform& ref, const Waveform& est, double chunk_s = 1.0,
                              double silence_floor_db = -60.0);
double Median(std::vector<double> values);

// Mean over songs of full-song SnrDb, per stem. Throws MissingStem.
std::array<double, kNumStems> Usdr(const std::vector<SongResult>& songs);
// Median over songs of the per-song median chunk SNR. A song with no scorable
// chunk for a stem is left out of that stem; NoScorableChunks if none remain.
std::array<double, kNumStems> Csdr(const std::vector<SongResult>& songs, double chunk_s = 1.0,
                                   double silence_floor_db = -60.0);

struct StemScore {
  double usdr = 0.0;
  double csdr = 0.0;
  friend bool operator==(const StemScore&, const StemScore&) = default;
};

struct SongScore {
  std::string name;
  std::array<double, kNumStems> usdr{};
  std::array<std::optional<double>, kNumStems> csdr{};
  friend bool operator==(const SongScore&, const SongScore&) = default;
};

struct ReportConfig {
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  std::string window;
  bool center_pad = true;
  double chunk_s = 12.0;
  double hop_s = 6.0;
  double csdr_chunk_s = 1.0;
  double silence_floor_db = -60.0;
  std::string model_checksum;
  friend bool operator==(const ReportConfig&, const ReportConfig&) = default;
};

struct EvalReport {
  ReportConfig config;
  std::array<StemScore, kNumStems> stems{};
  StemScore average;
  std::vector<SongScore> songs;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalOptions {
  double chunk_s = 12.0;
  double hop_s = 6.0;
  double csdr_chunk_s = 1.0;
  double silence_floor_db = -60.0;
};

EvalReport BuildReport(const std::vector<SongResult>& songs, const EvalOptions& opts,
                       ReportConfig config);

// Separates every song with SeparateLong and scores it. The model must have
// exactly four outputs.
EvalReport EvaluateSongs(const Separator& model, const std::vector<std::string>& names,
                         const std::vector<StemSet>& songs, const EvalOptions& opts,
                         ReportConfig config);

void EmitReport(const EvalReport& report, const std::filesystem::path& path);
EvalReport ReadReport(const std::filesystem::path& path);

}  // namespace mixitkit

#endif  // MIXITKIT_EVALUATION_HPP_
