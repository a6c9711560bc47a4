// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/data_pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mixitkit/error.hpp"
#include "mixitkit/wav_io.hpp"

namespace mixitkit {
namespace {

std::size_t ToSamples(double seconds, double sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string ManifestLine(const ClipRecord& r) {
  nlohmann::ordered_json j;
  j["source_path"] = r.source_path;
  j["offset_s"] = r.offset_s;
  j["duration_s"] = r.duration_s;
  j["sample_rate"] = r.sample_rate;
  j["mean_power"] = r.mean_power;
  return j.dump();
}

void WriteManifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : records) out << ManifestLine(r) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<ClipRecord> ReadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<ClipRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClipRecord r;
      r.source_path = j.at("source_path").get<std::string>();
      r.offset_s = j.at("offset_s").get<double>();
      r.duration_s = j.at("duration_s").get<double>();
      r.sample_rate = j.at("sample_rate").get<double>();
      r.mean_power = j.at("mean_power").get<double>();
      if (!(r.duration_s > 0.0) || r.offset_s < 0.0) throw std::runtime_error("bad clip window");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kInsufficientData,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::size_t> WindowOffsets(std::size_t length, std::size_t clip, std::size_t hop) {
  if (clip == 0 || hop == 0) throw Error(ErrorKind::kShapeMismatch, "clip and hop must be positive");
  std::vector<std::size_t> out;
  for (std::size_t start = 0; start + clip <= length; start += hop) out.push_back(start);
  return out;
}

std::vector<ClipRecord> SegmentCorpus(const std::vector<std::filesystem::path>& tracks,
                                      double clip_len_s, double hop_s) {
  if (!(clip_len_s > hop_s && hop_s > 0.0))
    throw Error(ErrorKind::kShapeMismatch, "need clip_len_s > hop_s > 0");
  std::vector<ClipRecord> out;
  for (const auto& path : tracks) {
    WavInfo info;
    try {
      info = ReadWavInfo(path);
    } catch (const Error& e) {
      spdlog::warn("skipping unreadable file {}: {}", path.string(), e.what());
      continue;
    }
    const std::size_t clip = ToSamples(clip_len_s, info.sample_rate);
    const std::size_t hop = ToSamples(hop_s, info.sample_rate);
    for (std::size_t offset : WindowOffsets(info.frames, clip, hop)) {
      ClipRecord r;
      r.source_path = path.string();
      r.offset_s = static_cast<double>(offset) / info.sample_rate;
      r.duration_s = static_cast<double>(clip) / info.sample_rate;
      r.sample_rate = info.sample_rate;
      out.push_back(std::move(r));
    }
  }
  return out;
}

SilenceDecision SilenceFilter(const Waveform& clip, double interval_s, double silence_db,
                              double max_silent_s) {
  const PowerProfile profile = ComputePowerProfile(clip, interval_s);
  const double peak =
      profile.powers.empty() ? 0.0 : *std::max_element(profile.powers.begin(), profile.powers.end());
  const double threshold = peak * std::pow(10.0, silence_db / 10.0);
  const std::size_t interval = ToSamples(interval_s, clip.sample_rate());
  std::size_t silent_samples = 0;
  for (std::size_t k = 0; k < profile.powers.size(); ++k) {
    if (profile.powers[k] <= threshold) {
      const std::size_t begin = k * interval;
      silent_samples += std::min(clip.length(), begin + interval) - begin;
    }
  }
  SilenceDecision d;
  d.silent_s = static_cast<double>(silent_samples) / clip.sample_rate();
  d.keep = static_cast<double>(silent_samples) <= max_silent_s * clip.sample_rate();
  return d;
}

GateDecision SampleRateGate(double sample_rate) {
  if (sample_rate < kTargetSampleRate) return {false, "sample rate below 44100 Hz"};
  if (sample_rate > kTargetSampleRate) return {false, "resampling unsupported"};
  return {true, ""};
}

PrepareResult PrepareCorpus(const std::vector<std::filesystem::path>& tracks,
                            const PrepareOptions& opts) {
  if (!(opts.clip_len_s > opts.hop_s && opts.hop_s > 0.0))
    throw Error(ErrorKind::kShapeMismatch, "need clip_len_s > hop_s > 0");
  PrepareResult result;
  for (const auto& path : tracks) {
    ++result.tracks_seen;
    WavInfo info;
    try {
      info = ReadWavInfo(path);
    } catch (const Error& e) {
      ++result.tracks_rejected;
      result.log.push_back(path.string() + ": unreadable (" + e.what() + ")");
      spdlog::warn("skipping unreadable file {}: {}", path.string(), e.what());
      continue;
    }
    const GateDecision gate = SampleRateGate(info.sample_rate);
    if (!gate.accept) {
      ++result.tracks_rejected;
      result.log.push_back(path.string() + ": " + gate.reason);
      spdlog::info("rejecting {}: {}", path.string(), gate.reason);
      continue;
    }
    const Waveform audio = ReadWav(path);
    const std::size_t clip = ToSamples(opts.clip_len_s, info.sample_rate);
    const std::size_t hop = ToSamples(opts.hop_s, info.sample_rate);
    for (std::size_t offset : WindowOffsets(audio.length(), clip, hop)) {
      const Waveform segment = audio.slice(offset, clip);
      if (!SilenceFilter(segment, opts.interval_s, opts.silence_db, opts.max_silent_s).keep) {
        ++result.clips_silent;
        continue;
      }
      ClipRecord r;
      r.source_path = path.string();
      r.offset_s = static_cast<double>(offset) / info.sample_rate;
      r.duration_s = static_cast<double>(clip) / info.sample_rate;
      r.sample_rate = info.sample_rate;
      r.mean_power = Energy(segment) / static_cast<double>(segment.samples().size());
      result.kept.push_back(std::move(r));
    }
  }
  return result;
}

std::vector<std::filesystem::path> ListWavFiles(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(ErrorKind::kIo, "not a readable directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ClipStore::AddTrack(const std::string& path, Waveform audio) {
  tracks_.insert_or_assign(path, std::move(audio));
}

const Waveform& ClipStore::Track(const std::string& path) {
  auto it = tracks_.find(path);
  if (it == tracks_.end()) it = tracks_.emplace(path, ReadWav(path)).first;
  return it->second;
}

Waveform ClipStore::Load(const ClipRecord& clip) {
  const Waveform& track = Track(clip.source_path);
  const std::size_t begin = ToSamples(clip.offset_s, track.sample_rate());
  const std::size_t count = ToSamples(clip.duration_s, track.sample_rate());
  if (begin + count > track.length())
    throw Error(ErrorKind::kInsufficientData, "clip exceeds track " + clip.source_path);
  return track.slice(begin, count);
}

Waveform RandomCrop(const Waveform& clip, std::size_t samples, Rng& rng) {
  if (samples == 0 || clip.length() < samples)
    throw Error(ErrorKind::kInsufficientData, "clip of " + std::to_string(clip.length()) +
                                                  " samples is shorter than the " +
                                                  std::to_string(samples) + "-sample segment");
  std::uniform_int_distribution<std::size_t> pick(0, clip.length() - samples);
  return clip.slice(pick(rng), samples);
}

MomBatch BuildMomBatch(const std::vector<ClipRecord>& manifest, ClipStore& store,
                       std::size_t batch_size, double seg_len_s, Rng& rng) {
  if (batch_size == 0) throw Error(ErrorKind::kInsufficientData, "batch size must be positive");
  if (manifest.size() < 2 * batch_size)
    throw Error(ErrorKind::kInsufficientData, "manifest has " + std::to_string(manifest.size()) +
                                                  " clips, batch needs " + std::to_string(2 * batch_size));
  {
    const auto& first = manifest.front().source_path;
    if (std::all_of(manifest.begin(), manifest.end(),
                    [&](const ClipRecord& r) { return r.source_path == first; }))
      throw Error(ErrorKind::kInsufficientData, "manifest needs at least two distinct tracks");
  }

  // Greedy pairing; a dead end just redraws the whole batch.
  constexpr int kAttempts = 16;
  std::vector<std::array<std::size_t, 2>> pairs;
  for (int attempt = 0; attempt < kAttempts && pairs.size() < batch_size; ++attempt) {
    pairs.clear();
    std::vector<bool> used(manifest.size(), false);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::vector<std::size_t> free;
      for (std::size_t k = 0; k < manifest.size(); ++k)
        if (!used[k]) free.push_back(k);
      const std::size_t a = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
      used[a] = true;
      std::vector<std::size_t> partners;
      for (std::size_t k = 0; k < manifest.size(); ++k)
        if (!used[k] && manifest[k].source_path != manifest[a].source_path) partners.push_back(k);
      if (partners.empty()) break;
      const std::size_t b =
          partners[std::uniform_int_distribution<std::size_t>(0, partners.size() - 1)(rng)];
      used[b] = true;
      pairs.push_back({a, b});
    }
  }
  if (pairs.size() < batch_size)
    throw Error(ErrorKind::kInsufficientData, "cannot pair clips from distinct tracks");

  MomBatch batch;
  for (const auto& [a, b] : pairs) {
    const Waveform ca = store.Load(manifest[a]);
    const Waveform cb = store.Load(manifest[b]);
    Waveform x1 = RandomCrop(ca, ToSamples(seg_len_s, ca.sample_rate()), rng);
    Waveform x2 = RandomCrop(cb, ToSamples(seg_len_s, cb.sample_rate()), rng);
    batch.mom.push_back(Mix(x1, x2));
    batch.x1.push_back(std::move(x1));
    batch.x2.push_back(std::move(x2));
    batch.sources.push_back({manifest[a].source_path, manifest[b].source_path});
  }
  return batch;
}

Waveform StemSet::Mixture() const {
  Validate();
  return Mix(std::span<const Waveform>(stems.data(), stems.size()));
}

void StemSet::Validate() const {
  for (std::size_t s = 1; s < kNumStems; ++s) CheckSameShape(stems[0], stems[s], "stem set");
}

StemSet LoadStemSet(const std::filesystem::path& dir) {
  StemSet set;
  for (std::size_t s = 0; s < kNumStems; ++s) {
    const auto path = dir / (std::string(kStemNames[s]) + ".wav");
    if (!std::filesystem::exists(path))
      throw Error(ErrorKind::kMissingStem, "missing " + path.string());
    set.stems[s] = ReadWav(path);
  }
  set.Validate();
  return set;
}

std::vector<std::filesystem::path> ListSongDirs(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec))
    throw Error(ErrorKind::kIo, "not a readable directory: " + root.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    bool complete = true;
    for (auto name : kStemNames)
      complete = complete && std::filesystem::exists(entry.path() / (std::string(name) + ".wav"));
    if (complete) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DynamicMixResult DynamicMix(const StemPools& pools, const DynamicMixOptions& opts, Rng& rng) {
  for (std::size_t s = 0; s < kNumStems; ++s)
    if (pools[s].empty())
      throw Error(ErrorKind::kInsufficientData, std::string(kStemNames[s]) + " pool is empty");
  std::uniform_real_distribution<double> gain(-opts.gain_db, opts.gain_db);
  std::bernoulli_distribution drop(std::clamp(opts.drop_p, 0.0, 1.0));

  DynamicMixResult r;
  for (r.attempts = 1; r.attempts <= opts.max_retries + 1; ++r.attempts) {
    for (std::size_t s = 0; s < kNumStems; ++s) {
      const auto& pool = pools[s];
      const Waveform& clip = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      Waveform seg = RandomCrop(clip, ToSamples(opts.seg_len_s, clip.sample_rate()), rng);
      r.gains_db[s] = gain(rng);
      r.dropped[s] = drop(rng);
      if (r.dropped[s] || Rms(seg) < 1e-12) {
        for (double& v : seg.samples()) v = 0.0;
      } else {
        seg = ApplyGainDb(RmsNormalize(seg), r.gains_db[s]);
      }
      r.references.stems[s] = std::move(seg);
    }
    r.mixture = r.references.Mixture();
    if (Energy(r.mixture) > 0.0) return r;
  }
  throw Error(ErrorKind::kDegenerateBatch,
              "every dynamic mixture was silent after " + std::to_string(opts.max_retries) + " retries");
}

std::vector<ActivitySpan> SourceActivityDetect(const Waveform& stem, const SadOptions& opts) {
  if (!(opts.frame_s > 0.0) || !(opts.on_db > opts.off_db))
    throw Error(ErrorKind::kShapeMismatch, "SAD needs frame_s > 0 and on_db > off_db");
  const PowerProfile profile = ComputePowerProfile(stem, opts.frame_s);
  std::vector<ActivitySpan> spans;
  if (profile.powers.empty()) return spans;
  const double peak = *std::max_element(profile.powers.begin(), profile.powers.end());
  if (!(peak > 0.0)) return spans;

  const double on_ratio = std::pow(10.0, opts.on_db / 10.0);
  const double off_ratio = std::pow(10.0, opts.off_db / 10.0);
  std::vector<double> loud;
  for (double p : profile.powers)
    if (p >= peak * on_ratio) loud.push_back(p);
  const double reference = Median(loud);

  const double duration = stem.duration_s();
  bool open = false;
  ActivitySpan cur;
  for (std::size_t k = 0; k < profile.powers.size(); ++k) {
    const double p = profile.powers[k];
    const double start = static_cast<double>(k) * opts.frame_s;
    const double end = std::min(duration, start + opts.frame_s);
    if (!open && p >= reference * on_ratio) {
      open = true;
      cur.start_s = start;
    }
    if (open) {
      if (p < reference * off_ratio) {
        open = false;
        spans.push_back(cur);
      } else {
        cur.end_s = end;
      }
    }
  }
  if (open) spans.push_back(cur);

  std::vector<ActivitySpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.start_s - merged.back().end_s <= opts.merge_gap_s + 1e-12)
      merged.back().end_s = s.end_s;
    else
      merged.push_back(s);
  }
  return merged;
}

StemPools BuildStemPools(const std::vector<StemSet>& songs, double seg_len_s, const SadOptions* sad) {
  StemPools pools;
  for (const auto& song : songs) {
    for (std::size_t s = 0; s < kNumStems; ++s) {
      const Waveform& stem = song.stems[s];
      const std::size_t seg = ToSamples(seg_len_s, stem.sample_rate());
      if (sad == nullptr) {
        if (stem.length() >= seg) pools[s].push_back(stem);
        continue;
      }
      for (const auto& span : SourceActivityDetect(stem, *sad)) {
        const std::size_t begin = ToSamples(span.start_s, stem.sample_rate());
        const std::size_t end = std::min(stem.length(), ToSamples(span.end_s, stem.sample_rate()));
        if (end >= begin + seg) pools[s].push_back(stem.slice(begin, end - begin));
      }
    }
  }
  return pools;
}

}  // namespace mixitkit
