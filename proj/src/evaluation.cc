// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

constexpr const char* kMetricNotes =
    "cSDR is the median over songs of the median over non-overlapping chunks of plain "
    "per-chunk SNR (no distortion filter); chunks whose reference energy is below the "
    "silence floor relative to the song's loudest chunk are excluded. SNR values are capped "
    "at 100 dB.";

std::size_t Samples(double seconds, double sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

void CheckSong(const SongResult& song) {
  if (song.refs.size() != kNumStems || song.ests.size() != kNumStems)
    throw Error(ErrorKind::kMissingStem, song.name + ": expected 4 references and 4 estimates");
  for (std::size_t s = 0; s < kNumStems; ++s) {
    if (song.refs[s].empty() || song.ests[s].empty())
      throw Error(ErrorKind::kMissingStem, song.name + ": " + std::string(kStemNames[s]) + " missing");
    CheckSameShape(song.refs[s], song.ests[s], "song result");
  }
}

std::optional<double> SongCsdr(const Waveform& ref, const Waveform& est, double chunk_s,
                               double floor_db) {
  auto snrs = ChunkSnrs(ref, est, chunk_s, floor_db);
  if (snrs.empty()) return std::nullopt;
  return Median(std::move(snrs));
}

nlohmann::ordered_json ScoreJson(const StemScore& s) {
  nlohmann::ordered_json j;
  j["usdr"] = s.usdr;
  j["csdr"] = s.csdr;
  return j;
}

StemScore ScoreFrom(const nlohmann::json& j) {
  return {j.at("usdr").get<double>(), j.at("csdr").get<double>()};
}

}  // namespace

double SnrDb(const Waveform& ref, const Waveform& est) {
  CheckSameShape(ref, est, "snr_db");
  const double ref_e = Energy(ref);
  double err = 0.0;
  const auto& r = ref.samples();
  const auto& e = est.samples();
  for (std::size_t i = 0; i < r.size(); ++i) err += (r[i] - e[i]) * (r[i] - e[i]);
  const double eps = 1e-10 * ref_e + 1e-30;
  return std::min(kSnrCapDb, 10.0 * std::log10((ref_e + eps) / (err + eps)));
}

std::vector<OverlapChunk> OverlapAddPlan(std::size_t length, std::size_t chunk, std::size_t hop) {
  if (chunk == 0 || hop == 0 || hop > chunk)
    throw Error(ErrorKind::kShapeMismatch, "overlap-add needs 0 < hop <= chunk");
  std::vector<OverlapChunk> plan;
  if (length <= chunk) {
    plan.push_back({0, length, std::vector<double>(length, 1.0)});
    return plan;
  }
  for (std::size_t start = 0;; start += hop) {
    const std::size_t n = std::min(chunk, length - start);
    plan.push_back({start, n, std::vector<double>(n, 1.0)});
    if (start + chunk >= length) break;
  }
  const std::size_t overlap = chunk - hop;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    auto& w = plan[k].weight;
    for (std::size_t i = 0; i < overlap; ++i) {
      const double ramp = (static_cast<double>(i) + 0.5) / static_cast<double>(overlap);
      if (k > 0) w[i] *= ramp;
      if (k + 1 < plan.size()) w[w.size() - overlap + i] *= 1.0 - ramp;
    }
  }
  std::vector<double> total(length, 0.0);
  for (const auto& c : plan)
    for (std::size_t i = 0; i < c.length; ++i) total[c.start + i] += c.weight[i];
  for (auto& c : plan)
    for (std::size_t i = 0; i < c.length; ++i) c.weight[i] /= total[c.start + i];
  return plan;
}

std::vector<Waveform> SeparateLong(const Separator& model, const Waveform& song, double chunk_s,
                                   double hop_s) {
  const std::size_t chunk = Samples(chunk_s, song.sample_rate());
  const std::size_t hop = Samples(hop_s, song.sample_rate());
  if (song.length() <= chunk) return model.Separate(song);
  const auto plan = OverlapAddPlan(song.length(), chunk, hop);
  std::vector<Waveform> out(model.num_outputs(),
                            Waveform(song.channels(), song.length(), song.sample_rate()));
  for (const auto& c : plan) {
    const auto ests = model.Separate(song.slice(c.start, c.length));
    if (ests.size() != out.size()) throw Error(ErrorKind::kShapeMismatch, "separator output count changed");
    for (std::size_t n = 0; n < out.size(); ++n)
      for (std::size_t m = 0; m < song.channels(); ++m) {
        const auto src = ests[n].channel(m);
        auto dst = out[n].channel(m);
        for (std::size_t i = 0; i < c.length; ++i) dst[c.start + i] += c.weight[i] * src[i];
      }
  }
  return out;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kNoScorableChunks, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> ChunkSnrs(const Waveform& ref, const Waveform& est, double chunk_s,
                              double silence_floor_db) {
  CheckSameShape(ref, est, "chunk snr");
  const std::size_t chunk = Samples(chunk_s, ref.sample_rate());
  if (chunk == 0) throw Error(ErrorKind::kShapeMismatch, "chunk_s too small");
  std::vector<std::size_t> starts;
  std::size_t size = chunk;
  if (ref.length() < chunk) {
    size = ref.length();
    if (size > 0) starts.push_back(0);
  } else {
    for (std::size_t b = 0; b + chunk <= ref.length(); b += chunk) starts.push_back(b);
  }
  std::vector<double> energies;
  for (std::size_t b : starts) energies.push_back(Energy(ref.slice(b, size)));
  const double peak = energies.empty() ? 0.0 : *std::max_element(energies.begin(), energies.end());
  std::vector<double> out;
  if (!(peak > 0.0)) return out;
  const double floor = peak * std::pow(10.0, silence_floor_db / 10.0);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (energies[k] < floor || !(energies[k] > 0.0)) continue;
    out.push_back(SnrDb(ref.slice(starts[k], size), est.slice(starts[k], size)));
  }
  return out;
}

std::array<double, kNumStems> Usdr(const std::vector<SongResult>& songs) {
  if (songs.empty()) throw Error(ErrorKind::kMissingStem, "no songs to score");
  std::array<double, kNumStems> sum{};
  for (const auto& song : songs) {
    CheckSong(song);
    for (std::size_t s = 0; s < kNumStems; ++s) sum[s] += SnrDb(song.refs[s], song.ests[s]);
  }
  for (double& v : sum) v /= static_cast<double>(songs.size());
  return sum;
}

std::array<double, kNumStems> Csdr(const std::vector<SongResult>& songs, double chunk_s,
                                   double silence_floor_db) {
  std::array<std::vector<double>, kNumStems> per_song;
  for (const auto& song : songs) {
    CheckSong(song);
    for (std::size_t s = 0; s < kNumStems; ++s) {
      const auto v = SongCsdr(song.refs[s], song.ests[s], chunk_s, silence_floor_db);
      if (v)
        per_song[s].push_back(*v);
      else
        spdlog::warn("{}: {} has no scorable chunk, left out of its cSDR", song.name, kStemNames[s]);
    }
  }
  std::array<double, kNumStems> out{};
  for (std::size_t s = 0; s < kNumStems; ++s) {
    if (per_song[s].empty())
      throw Error(ErrorKind::kNoScorableChunks, std::string(kStemNames[s]) + " is silent in every song");
    out[s] = Median(per_song[s]);
  }
  return out;
}

EvalReport BuildReport(const std::vector<SongResult>& songs, const EvalOptions& opts,
                       ReportConfig config) {
  EvalReport report;
  config.chunk_s = opts.chunk_s;
  config.hop_s = opts.hop_s;
  config.csdr_chunk_s = opts.csdr_chunk_s;
  config.silence_floor_db = opts.silence_floor_db;
  report.config = std::move(config);
  const auto usdr = Usdr(songs);
  const auto csdr = Csdr(songs, opts.csdr_chunk_s, opts.silence_floor_db);
  for (std::size_t s = 0; s < kNumStems; ++s) {
    report.stems[s] = {usdr[s], csdr[s]};
    report.average.usdr += usdr[s] / static_cast<double>(kNumStems);
    report.average.csdr += csdr[s] / static_cast<double>(kNumStems);
  }
  for (const auto& song : songs) {
    SongScore sc;
    sc.name = song.name;
    for (std::size_t s = 0; s < kNumStems; ++s) {
      sc.usdr[s] = SnrDb(song.refs[s], song.ests[s]);
      sc.csdr[s] = SongCsdr(song.refs[s], song.ests[s], opts.csdr_chunk_s, opts.silence_floor_db);
    }
    report.songs.push_back(std::move(sc));
  }
  return report;
}

EvalReport EvaluateSongs(const Separator& model, const std::vector<std::string>& names,
                         const std::vector<StemSet>& songs, const EvalOptions& opts,
                         ReportConfig config) {
  if (model.num_outputs() != kNumStems)
    throw Error(ErrorKind::kIncompatibleConfig, "evaluation needs a 4-output model, got " +
                                                    std::to_string(model.num_outputs()));
  if (names.size() != songs.size()) throw Error(ErrorKind::kShapeMismatch, "one name per song required");
  std::vector<SongResult> results;
  for (std::size_t k = 0; k < songs.size(); ++k) {
    SongResult r;
    r.name = names[k];
    r.refs.assign(songs[k].stems.begin(), songs[k].stems.end());
    r.ests = SeparateLong(model, songs[k].Mixture(), opts.chunk_s, opts.hop_s);
    results.push_back(std::move(r));
  }
  return BuildReport(results, opts, std::move(config));
}

void EmitReport(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  const auto& c = report.config;
  auto& jc = j["config"];
  jc["fft_size"] = c.fft_size;
  jc["hop"] = c.hop;
  jc["window"] = c.window;
  jc["center_pad"] = c.center_pad;
  jc["chunk_s"] = c.chunk_s;
  jc["hop_s"] = c.hop_s;
  jc["csdr_chunk_s"] = c.csdr_chunk_s;
  jc["silence_floor_db"] = c.silence_floor_db;
  jc["snr_cap_db"] = kSnrCapDb;
  jc["model_checksum"] = c.model_checksum;
  jc["metric_notes"] = kMetricNotes;
  for (std::size_t s = 0; s < kNumStems; ++s) j["stems"][std::string(kStemNames[s])] = ScoreJson(report.stems[s]);
  j["average"] = ScoreJson(report.average);
  j["songs"] = nlohmann::ordered_json::array();
  for (const auto& song : report.songs) {
    nlohmann::ordered_json js;
    js["name"] = song.name;
    for (std::size_t s = 0; s < kNumStems; ++s) {
      auto& e = js["stems"][std::string(kStemNames[s])];
      e["usdr"] = song.usdr[s];
      e["csdr"] = song.csdr[s] ? nlohmann::ordered_json(*song.csdr[s]) : nlohmann::ordered_json(nullptr);
    }
    j["songs"].push_back(std::move(js));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

EvalReport ReadReport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    EvalReport r;
    const auto& jc = j.at("config");
    r.config.fft_size = jc.at("fft_size").get<std::size_t>();
    r.config.hop = jc.at("hop").get<std::size_t>();
    r.config.window = jc.at("window").get<std::string>();
    r.config.center_pad = jc.at("center_pad").get<bool>();
    r.config.chunk_s = jc.at("chunk_s").get<double>();
    r.config.hop_s = jc.at("hop_s").get<double>();
    r.config.csdr_chunk_s = jc.at("csdr_chunk_s").get<double>();
    r.config.silence_floor_db = jc.at("silence_floor_db").get<double>();
    r.config.model_checksum = jc.at("model_checksum").get<std::string>();
    for (std::size_t s = 0; s < kNumStems; ++s) r.stems[s] = ScoreFrom(j.at("stems").at(std::string(kStemNames[s])));
    r.average = ScoreFrom(j.at("average"));
    for (const auto& js : j.at("songs")) {
      SongScore sc;
      sc.name = js.at("name").get<std::string>();
      for (std::size_t s = 0; s < kNumStems; ++s) {
        const auto& e = js.at("stems").at(std::string(kStemNames[s]));
        sc.usdr[s] = e.at("usdr").get<double>();
        if (!e.at("csdr").is_null()) sc.csdr[s] = e.at("csdr").get<double>();
      }
      r.songs.push_back(std::move(sc));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, path.string() + ": " + e.what());
  }
}

}  // namespace mixitkit
