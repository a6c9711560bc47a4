// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "mixitkit/checkpoint.hpp"
#include "mixitkit/data_pipeline.hpp"
#include "mixitkit/evaluation.hpp"
#include "mixitkit/masknet.hpp"
#include "mixitkit/training.hpp"
#include "mixitkit/wav_io.hpp"

namespace fs = std::filesystem;

namespace mixitkit {
namespace {

struct Common {
  std::string config;
  RunConfig Load() const {
    RunConfig cfg = config.empty() ? RunConfig() : LoadConfig(config);
    ApplyEnvironment(cfg);
    return cfg;
  }
};

struct TrainArgs {
  std::string checkpoint;
  std::string out;
  std::string log;
  bool resume = false;
  std::optional<std::size_t> max_steps;
};

LoopOptions MakeLoopOptions(const TrainArgs& a, std::size_t checkpoint_every) {
  LoopOptions o;
  o.checkpoint = a.out;
  o.log = a.log;
  o.checkpoint_every = checkpoint_every;
  o.stop_at_step = a.max_steps;
  return o;
}

// Picks up an interrupted run when --resume is given and state exists.
bool TryResume(const TrainArgs& a, Phase phase, std::optional<MaskNet>& model, TrainingState& state) {
  if (!a.resume || !fs::exists(StatePath(a.out)) || !fs::exists(a.out)) return false;
  model.emplace(LoadCheckpoint(a.out));
  state = LoadTrainingState(a.out, *model);
  if (state.phase != phase)
    throw Error(ErrorKind::kBadCheckpoint, a.out + " holds " + PhaseName(state.phase) + " state");
  return true;
}

void ReportLoop(std::ostream& out, const char* what, const LoopResult& r, const std::string& path) {
  if (!r.completed) {
    out << what << " stopped at step " << r.step << "\n";
    return;
  }
  out << what << " finished " << r.step << " steps; checkpoint " << path << " checksum "
      << ChecksumHex(CheckpointChecksum(path)) << "\n";
}

std::vector<StemSet> LoadSongs(const std::string& root, std::vector<std::string>* names = nullptr) {
  std::vector<StemSet> songs;
  for (const auto& dir : ListSongDirs(root)) {
    songs.push_back(LoadStemSet(dir));
    if (names) names->push_back(dir.filename().string());
  }
  return songs;
}

int CmdPrepare(const Common& c, const std::string& corpus, const std::string& out_path,
               std::optional<double> silence_db, std::optional<double> max_silent_s, std::ostream& out) {
  RunConfig cfg = c.Load();
  PrepareOptions opts = cfg.data.prepare;
  if (silence_db) opts.silence_db = *silence_db;
  if (max_silent_s) opts.max_silent_s = *max_silent_s;
  const auto tracks = ListWavFiles(corpus);
  if (tracks.empty()) spdlog::warn("no .wav files under {}", corpus);
  const PrepareResult r = PrepareCorpus(tracks, opts);
  WriteManifest(out_path, r.kept);
  for (const auto& line : r.log) out << line << "\n";
  out << "kept " << r.kept.size() << " clips from " << r.tracks_seen << " tracks; " << r.tracks_rejected
      << " tracks rejected, " << r.clips_silent << " silent clips dropped\n";
  return kExitOk;
}

int CmdPretrain(const Common& c, const std::string& manifest_path, const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = c.Load();
  TrainConfig tc = cfg.pretrain.train;
  tc.seed = cfg.seed;
  const auto manifest = ReadManifest(manifest_path);
  ClipStore store;

  std::optional<MaskNet> model;
  TrainingState state;
  if (!TryResume(a, Phase::kPretrain, model, state)) {
    const auto bands = cfg.model.Bands(cfg.stft.bins());
    model.emplace(InitParams(cfg.seed, cfg.model.embed_dim, cfg.model.num_outputs, cfg.model.channels, bands,
                             cfg.model.init_scale),
                  cfg.stft);
  } else {
    out << "resuming pretrain at step " << state.step << "\n";
  }
  const auto r = RunPretraining(*model, state, manifest, store, tc, MakeLoopOptions(a, cfg.pretrain.checkpoint_every));
  ReportLoop(out, "pretrain", r, a.out);
  return kExitOk;
}

int CmdSelect(const Common& c, const std::string& checkpoint, const std::string& valdir, const std::string& out_path,
              const std::string& json_path, std::ostream& out) {
  const RunConfig cfg = c.Load();
  const MaskNet model = LoadCheckpoint(checkpoint);
  const auto songs = LoadSongs(valdir);
  const SelectionReport rep = SelectChannels(model, songs, cfg.select_chunk_s);
  const auto& sel = rep.selection.stem_to_channel;
  for (std::size_t s = 0; s < kNumStems; ++s) out << (s ? " " : "") << kStemNames[s] << ":" << sel[s];
  out << "\n";
  if (!out_path.empty()) {
    const auto sum = SaveCheckpoint(out_path, RestrictModel(model, rep.selection));
    out << "restricted checkpoint " << out_path << " checksum " << ChecksumHex(sum) << "\n";
  }
  if (!json_path.empty()) {
    nlohmann::ordered_json j;
    for (std::size_t s = 0; s < kNumStems; ++s) j["selection"][std::string(kStemNames[s])] = sel[s];
    j["chunks"] = rep.chunks;
    for (std::size_t s = 0; s < kNumStems; ++s) {
      std::vector<int> row;
      for (Eigen::Index ch = 0; ch < rep.counts.cols(); ++ch) row.push_back(rep.counts(static_cast<Eigen::Index>(s), ch));
      j["counts"][std::string(kStemNames[s])] = row;
    }
    std::ofstream f(json_path, std::ios::trunc);
    if (!f) throw Error(ErrorKind::kIo, "cannot write " + json_path);
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

int CmdFinetune(const Common& c, const std::string& train_dir, const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = c.Load();
  TrainConfig tc = cfg.finetune.train;
  tc.seed = cfg.seed;
  const auto songs = LoadSongs(train_dir);
  if (songs.empty()) throw Error(ErrorKind::kInsufficientData, "no song directories under " + train_dir);
  const StemPools pools = BuildStemPools(songs, tc.seg_len_s, cfg.data.use_sad ? &cfg.data.sad : nullptr);

  std::optional<MaskNet> model;
  TrainingState state;
  if (!TryResume(a, Phase::kFinetune, model, state)) {
    if (a.checkpoint.empty()) throw Error(ErrorKind::kConfig, "finetune needs --checkpoint");
    model.emplace(LoadCheckpoint(a.checkpoint));
  } else {
    out << "resuming finetune at step " << state.step << "\n";
  }
  if (model->num_outputs() != kNumStems)
    throw Error(ErrorKind::kIncompatibleConfig, "finetune needs a 4-output checkpoint; run select-channels first");
  const auto r = RunFinetuning(*model, state, pools, tc, MakeLoopOptions(a, cfg.finetune.checkpoint_every));
  ReportLoop(out, "finetune", r, a.out);
  return kExitOk;
}

int CmdSeparate(const Common& c, const std::string& checkpoint, const std::string& input, const std::string& out_dir,
                std::ostream& out) {
  const RunConfig cfg = c.Load();
  const MaskNet model = LoadCheckpoint(checkpoint);
  if (model.num_outputs() != kNumStems)
    throw Error(ErrorKind::kIncompatibleConfig,
                "separate needs a 4-output checkpoint, got " + std::to_string(model.num_outputs()));
  const Waveform song = ReadWav(input);
  const auto stems = SeparateLong(model, song, cfg.eval.chunk_s, cfg.eval.hop_s);
  fs::create_directories(out_dir);
  for (std::size_t s = 0; s < kNumStems; ++s) {
    const auto path = fs::path(out_dir) / (std::string(kStemNames[s]) + ".wav");
    WriteWav(path, stems[s], SampleFormat::kFloat32);
    out << path.string() << "\n";
  }
  return kExitOk;
}

int CmdEvaluate(const Common& c, const std::string& checkpoint, const std::string& testset, const std::string& out_path,
                std::ostream& out) {
  const RunConfig cfg = c.Load();
  const MaskNet model = LoadCheckpoint(checkpoint);
  std::vector<std::string> names;
  const auto songs = LoadSongs(testset, &names);
  if (songs.empty()) throw Error(ErrorKind::kMissingStem, "no complete song directories under " + testset);
  ReportConfig rc;
  rc.fft_size = model.stft().fft_size;
  rc.hop = model.stft().hop;
  rc.window = WindowName(model.stft().window);
  rc.center_pad = model.stft().center_pad;
  rc.model_checksum = ChecksumHex(CheckpointChecksum(checkpoint));
  const EvalReport report = EvaluateSongs(model, names, songs, cfg.eval, rc);
  EmitReport(report, out_path);
  for (std::size_t s = 0; s < kNumStems; ++s)
    out << kStemNames[s] << ": uSDR " << report.stems[s].usdr << " dB, cSDR " << report.stems[s].csdr << " dB\n";
  out << "average: uSDR " << report.average.usdr << " dB, cSDR " << report.average.csdr << " dB\n";
  return kExitOk;
}

void AddTrainArgs(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--out", a.out, "checkpoint to write (also the resume source)")->required();
  sub->add_option("--log", a.log, "JSON-lines step log");
  sub->add_flag("--resume", a.resume, "continue from the state next to --out when present");
  sub->add_option("--max-steps", a.max_steps, "stop before this global step without a final checkpoint");
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kIncompatibleConfig:
    case ErrorKind::kBandMismatch:
      return kExitConfig;
    case ErrorKind::kUnsupportedFormat:
    case ErrorKind::kIo:
    case ErrorKind::kUnreadableFile:
    case ErrorKind::kInsufficientData:
    case ErrorKind::kMissingStem:
    case ErrorKind::kEmptyValidation:
    case ErrorKind::kNoScorableChunks:
    case ErrorKind::kBadCheckpoint:
    case ErrorKind::kShapeMismatch:
    case ErrorKind::kAllZeroSignal:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mixitkit: mixture-invariant training toolkit"};
  app.footer(ConfigHelp() + "\nExit codes: 0 success, 1 runtime error, 2 config error, 3 data error.");
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "YAML run configuration");

  std::string corpus, out_path, manifest, valdir, json_path, train_dir, input, out_dir, testset, checkpoint;
  std::optional<double> silence_db, max_silent_s;
  TrainArgs pre_args, ft_args;

  auto* prepare = app.add_subcommand("prepare", "segment a corpus into a clip manifest");
  prepare->add_option("--corpus", corpus, "directory of WAV tracks")->required();
  prepare->add_option("--out", out_path, "manifest to write (JSON lines)")->required();
  prepare->add_option("--silence-db", silence_db, "override data.silence_db");
  prepare->add_option("--max-silent-s", max_silent_s, "override data.max_silent_s");

  auto* pretrain = app.add_subcommand("pretrain", "unsupervised MixIT pre-training");
  pretrain->add_option("--manifest", manifest, "clip manifest from prepare")->required();
  AddTrainArgs(pretrain, pre_args);

  auto* select = app.add_subcommand("select-channels", "map pre-trained outputs to stems");
  select->add_option("--checkpoint", checkpoint, "pre-trained checkpoint")->required();
  select->add_option("--valdir", valdir, "validation songs (one directory of stems per song)")->required();
  select->add_option("--out", out_path, "write the 4-output restricted checkpoint here");
  select->add_option("--json", json_path, "write the selection and vote counts here");

  auto* finetune = app.add_subcommand("finetune", "supervised fine-tuning with dynamic mixing");
  finetune->add_option("--checkpoint", ft_args.checkpoint, "4-output starting checkpoint");
  finetune->add_option("--train-dir", train_dir, "training songs (one directory of stems per song)")->required();
  AddTrainArgs(finetune, ft_args);

  auto* separate = app.add_subcommand("separate", "separate one WAV into four stems");
  separate->add_option("--checkpoint", checkpoint, "4-output checkpoint")->required();
  separate->add_option("--input", input, "mixture WAV")->required();
  separate->add_option("--out-dir", out_dir, "directory for vocals/bass/drums/other.wav")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a test set and write report.json");
  evaluate->add_option("--checkpoint", checkpoint, "4-output checkpoint")->required();
  evaluate->add_option("--testset", testset, "test songs (one directory of stems per song)")->required();
  evaluate->add_option("--out", out_path, "report path")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*prepare) return CmdPrepare(common, corpus, out_path, silence_db, max_silent_s, out);
    if (*pretrain) return CmdPretrain(common, manifest, pre_args, out);
    if (*select) return CmdSelect(common, checkpoint, valdir, out_path, json_path, out);
    if (*finetune) return CmdFinetune(common, train_dir, ft_args, out);
    if (*separate) return CmdSeparate(common, checkpoint, input, out_dir, out);
    if (*evaluate) return CmdEvaluate(common, checkpoint, testset, out_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace mixitkit
