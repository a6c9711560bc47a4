// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "config.hpp"

#include <spdlog/fmt/fmt.h>
#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

struct Binding {
  std::string section;
  std::string name;
  std::string help;
  std::function<std::string(RunConfig&)> show;
  std::function<void(RunConfig&, const YAML::Node&)> set;
};

std::string Show(double v) { return fmt::format("{}", v); }
std::string Show(std::size_t v) { return std::to_string(v); }
std::string Show(int v) { return std::to_string(v); }
std::string Show(bool v) { return v ? "true" : "false"; }
std::string Show(const std::vector<std::size_t>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out + "]";
}

template <typename T>
Binding Bind(std::string section, std::string name, std::string help, std::function<T&(RunConfig&)> field) {
  Binding b{std::move(section), std::move(name), std::move(help), {}, {}};
  b.show = [field](RunConfig& c) { return Show(field(c)); };
  b.set = [field](RunConfig& c, const YAML::Node& n) { field(c) = n.as<T>(); };
  return b;
}

Binding BindSize(std::string section, std::string name, std::string help,
                 std::function<std::size_t&(RunConfig&)> field) {
  Binding b{std::move(section), std::move(name), std::move(help), {}, {}};
  b.show = [field](RunConfig& c) { return Show(field(c)); };
  b.set = [field](RunConfig& c, const YAML::Node& n) {
    const long long v = n.as<long long>();
    if (v < 0) throw std::invalid_argument("must be non-negative");
    field(c) = static_cast<std::size_t>(v);
  };
  return b;
}

std::vector<Binding> Bindings() {
  using C = RunConfig;
  std::vector<Binding> b;
  auto dbl = [&](const char* s, const char* k, const char* h, std::function<double&(C&)> f) {
    b.push_back(Bind<double>(s, k, h, std::move(f)));
  };
  auto sz = [&](const char* s, const char* k, const char* h, std::function<std::size_t&(C&)> f) {
    b.push_back(BindSize(s, k, h, std::move(f)));
  };
  auto flag = [&](const char* s, const char* k, const char* h, std::function<bool&(C&)> f) {
    b.push_back(Bind<bool>(s, k, h, std::move(f)));
  };

  dbl("data", "clip_len_s", "clip length in seconds", [](C& c) -> double& { return c.data.prepare.clip_len_s; });
  dbl("data", "clip_hop_s", "hop between clip starts in seconds", [](C& c) -> double& { return c.data.prepare.hop_s; });
  dbl("data", "silence_interval_s", "power-profile interval in seconds",
      [](C& c) -> double& { return c.data.prepare.interval_s; });
  dbl("data", "silence_db", "interval is silent at or below this level relative to the loudest",
      [](C& c) -> double& { return c.data.prepare.silence_db; });
  dbl("data", "max_silent_s", "drop clips with more silence than this",
      [](C& c) -> double& { return c.data.prepare.max_silent_s; });
  flag("data", "use_sad", "restrict fine-tuning stem pools to active spans", [](C& c) -> bool& { return c.data.use_sad; });
  dbl("data", "sad_frame_s", "activity detector frame length", [](C& c) -> double& { return c.data.sad.frame_s; });
  dbl("data", "sad_on_db", "activity onset threshold", [](C& c) -> double& { return c.data.sad.on_db; });
  dbl("data", "sad_off_db", "activity release threshold", [](C& c) -> double& { return c.data.sad.off_db; });
  dbl("data", "sad_merge_gap_s", "merge active spans closer than this",
      [](C& c) -> double& { return c.data.sad.merge_gap_s; });

  sz("stft", "fft_size", "FFT size (power of two)", [](C& c) -> std::size_t& { return c.stft.fft_size; });
  sz("stft", "hop", "hop size; fft_size / hop in {2, 4, 8}", [](C& c) -> std::size_t& { return c.stft.hop; });
  b.push_back(Binding{"stft", "window", "hann or sqrt_hann",
                      [](C& c) { return WindowName(c.stft.window); },
                      [](C& c, const YAML::Node& n) { c.stft.window = ParseWindow(n.as<std::string>()); }});
  flag("stft", "center", "pad fft_size / 2 on both ends", [](C& c) -> bool& { return c.stft.center_pad; });

  sz("model", "channels", "audio channels", [](C& c) -> std::size_t& { return c.model.channels; });
  sz("model", "embed_dim", "band embedding width", [](C& c) -> std::size_t& { return c.model.embed_dim; });
  sz("model", "num_outputs", "separator outputs during pre-training",
     [](C& c) -> std::size_t& { return c.model.num_outputs; });
  sz("model", "num_bands", "geometric band count when band_widths is empty",
     [](C& c) -> std::size_t& { return c.model.num_bands; });
  b.push_back(Bind<std::vector<std::size_t>>("model", "band_widths", "explicit band widths summing to fft_size / 2 + 1",
                                             [](C& c) -> std::vector<std::size_t>& { return c.model.band_widths; }));
  dbl("model", "init_scale", "decoder weight scale at initialization", [](C& c) -> double& { return c.model.init_scale; });

  for (const char* sec : {"pretrain", "finetune"}) {
    const bool pre = std::string(sec) == "pretrain";
    auto ph = [pre](C& c) -> PhaseConfig& { return pre ? c.pretrain : c.finetune; };
    sz(sec, "steps_per_epoch", "optimizer steps per epoch",
       [ph](C& c) -> std::size_t& { return ph(c).train.schedule.steps_per_epoch; });
    sz(sec, "epochs", "epochs to run", [ph](C& c) -> std::size_t& { return ph(c).train.epochs; });
    sz(sec, "batch_size", "examples per step", [ph](C& c) -> std::size_t& { return ph(c).train.batch_size; });
    dbl(sec, "seg_len_s", "training segment length in seconds",
        [ph](C& c) -> double& { return ph(c).train.seg_len_s; });
    dbl(sec, "lr_peak", "peak learning rate", [ph](C& c) -> double& { return ph(c).train.optim.lr_peak; });
    sz(sec, "warmup_steps", "linear warmup length",
       [ph](C& c) -> std::size_t& { return ph(c).train.schedule.warmup_steps; });
    if (pre) {
      dbl(sec, "decay", "learning-rate factor per epoch after warmup",
          [ph](C& c) -> double& { return ph(c).train.schedule.pretrain_decay; });
    } else {
      sz(sec, "hold_epochs", "epochs at the peak rate",
         [ph](C& c) -> std::size_t& { return ph(c).train.schedule.hold_epochs; });
      dbl(sec, "decay", "learning-rate factor per decay period",
          [ph](C& c) -> double& { return ph(c).train.schedule.finetune_decay; });
      sz(sec, "decay_every", "epochs per decay period",
         [ph](C& c) -> std::size_t& { return ph(c).train.schedule.decay_every; });
    }
    dbl(sec, "weight_decay", "decoupled weight decay", [ph](C& c) -> double& { return ph(c).train.optim.weight_decay; });
    dbl(sec, "beta1", "first-moment decay", [ph](C& c) -> double& { return ph(c).train.optim.beta1; });
    dbl(sec, "beta2", "second-moment decay", [ph](C& c) -> double& { return ph(c).train.optim.beta2; });
    dbl(sec, "eps", "Adam epsilon", [ph](C& c) -> double& { return ph(c).train.optim.eps; });
    dbl(sec, "clip_norm", "global gradient L2 clip", [ph](C& c) -> double& { return ph(c).train.clip_norm; });
    dbl(sec, "tau", "SNR loss soft threshold", [ph](C& c) -> double& { return ph(c).train.tau; });
    sz(sec, "checkpoint_every", "steps between checkpoints, 0 for final only",
       [ph](C& c) -> std::size_t& { return ph(c).checkpoint_every; });
    if (pre) {
      b.push_back(Binding{sec, "solver", "efficient or exhaustive",
                          [ph](C& c) {
                            return std::string(ph(c).train.solver == MixitSolver::kEfficient ? "efficient"
                                                                                             : "exhaustive");
                          },
                          [ph](C& c, const YAML::Node& n) {
                            const auto v = n.as<std::string>();
                            if (v == "efficient")
                              ph(c).train.solver = MixitSolver::kEfficient;
                            else if (v == "exhaustive")
                              ph(c).train.solver = MixitSolver::kExhaustive;
                            else
                              throw std::invalid_argument("expected efficient or exhaustive");
                          }});
    } else {
      dbl(sec, "drop_p", "stem dropout probability", [ph](C& c) -> double& { return ph(c).train.mix.drop_p; });
      dbl(sec, "gain_db", "stem gains uniform on [-gain_db, gain_db]",
          [ph](C& c) -> double& { return ph(c).train.mix.gain_db; });
      b.push_back(Bind<int>(sec, "max_retries", "redraws of a silent dynamic mixture",
                            [ph](C& c) -> int& { return ph(c).train.mix.max_retries; }));
      dbl(sec, "select_chunk_s", "channel-selection chunk length", [](C& c) -> double& { return c.select_chunk_s; });
    }
  }

  dbl("eval", "chunk_s", "inference chunk length", [](C& c) -> double& { return c.eval.chunk_s; });
  dbl("eval", "hop_s", "inference chunk hop", [](C& c) -> double& { return c.eval.hop_s; });
  dbl("eval", "csdr_chunk_s", "cSDR chunk length", [](C& c) -> double& { return c.eval.csdr_chunk_s; });
  dbl("eval", "silence_floor_db", "cSDR skips chunks this far below the loudest",
      [](C& c) -> double& { return c.eval.silence_floor_db; });
  return b;
}

[[noreturn]] void Fail(const std::string& origin, const YAML::Mark& mark, const std::string& msg) {
  throw Error(ErrorKind::kConfig, origin + ":" + std::to_string(mark.line + 1) + ": " + msg);
}

}  // namespace

BandSplitConfig ModelConfig::Bands(std::size_t bins) const {
  if (!band_widths.empty()) return BandSplitConfig{band_widths};
  return GeometricBands(bins, num_bands);
}

RunConfig::RunConfig() {
  pretrain.train.schedule.phase = Phase::kPretrain;
  pretrain.train.schedule.steps_per_epoch = 100;
  pretrain.train.schedule.warmup_steps = 100;
  finetune.train.schedule.phase = Phase::kFinetune;
  finetune.train.schedule.steps_per_epoch = 100;
  finetune.train.schedule.warmup_steps = 0;
}

void RunConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  try {
    stft.Validate();
  } catch (const Error& e) {
    fail(std::string("stft: ") + e.what());
  }
  const std::size_t bins = stft.bins();
  if (!model.band_widths.empty()) {
    std::size_t sum = 0;
    for (auto w : model.band_widths) {
      if (w == 0) fail("model.band_widths: every width must be at least 1");
      sum += w;
    }
    if (sum != bins)
      fail("model.band_widths: widths sum to " + std::to_string(sum) + " but stft.fft_size " +
           std::to_string(stft.fft_size) + " gives " + std::to_string(bins) + " bins");
  } else if (model.num_bands == 0 || model.num_bands > bins) {
    fail("model.num_bands: must lie in [1, " + std::to_string(bins) + "]");
  }
  if (model.num_outputs < kNumStems) fail("model.num_outputs: must be at least 4");
  if (model.channels < 1 || model.channels > 2) fail("model.channels: must be 1 or 2");
  if (model.embed_dim == 0) fail("model.embed_dim: must be positive");
  for (const auto* p : {&pretrain, &finetune}) {
    const char* name = p == &pretrain ? "pretrain" : "finetune";
    try {
      p->train.schedule.Validate();
    } catch (const Error& e) {
      fail(std::string(name) + ": " + e.what());
    }
    if (p->train.batch_size == 0) fail(std::string(name) + ".batch_size: must be positive");
    if (!(p->train.seg_len_s > 0.0)) fail(std::string(name) + ".seg_len_s: must be positive");
    if (!(p->train.clip_norm > 0.0)) fail(std::string(name) + ".clip_norm: must be positive");
    if (!(p->train.tau > 0.0)) fail(std::string(name) + ".tau: must be positive");
  }
  if (finetune.train.mix.drop_p < 0.0 || finetune.train.mix.drop_p > 1.0)
    fail("finetune.drop_p: must lie in [0, 1]");
  if (!(data.prepare.clip_len_s > data.prepare.hop_s && data.prepare.hop_s > 0.0))
    fail("data: need clip_len_s > clip_hop_s > 0");
  if (!(eval.hop_s > 0.0 && eval.hop_s <= eval.chunk_s)) fail("eval: need 0 < hop_s <= chunk_s");
}

RunConfig ParseConfig(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    Fail(origin, e.mark, e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) {
    cfg.Validate();
    return cfg;
  }
  if (!root.IsMap()) Fail(origin, root.Mark(), "top level must be a mapping");

  std::map<std::string, std::map<std::string, const Binding*>> table;
  const auto bindings = Bindings();
  for (const auto& b : bindings) table[b.section][b.name] = &b;

  for (const auto& entry : root) {
    const auto section = entry.first.as<std::string>();
    const YAML::Node& body = entry.second;
    if (section == "seed") {
      try {
        cfg.seed = body.as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        Fail(origin, body.Mark(), "seed: expected a non-negative integer");
      }
      continue;
    }
    const auto sec = table.find(section);
    if (sec == table.end()) Fail(origin, entry.first.Mark(), "unknown section '" + section + "'");
    if (body.IsNull()) continue;
    if (!body.IsMap()) Fail(origin, body.Mark(), "section '" + section + "' must be a mapping");
    for (const auto& kv : body) {
      const auto key = kv.first.as<std::string>();
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) Fail(origin, kv.first.Mark(), "unknown key '" + section + "." + key + "'");
      try {
        it->second->set(cfg, kv.second);
      } catch (const std::exception& e) {
        Fail(origin, kv.second.Mark(), "invalid value for '" + section + "." + key + "': " + e.what());
      }
    }
  }
  try {
    cfg.Validate();
  } catch (const Error& e) {
    // Point at the offending key when it was written in the file.
    std::string msg = e.what();
    for (const auto& entry : root) {
      if (!entry.second.IsMap()) continue;
      for (const auto& kv : entry.second) {
        const std::string dotted = entry.first.as<std::string>() + "." + kv.first.as<std::string>();
        if (msg.find(dotted + ":") != std::string::npos)
          throw Error(ErrorKind::kConfig, origin + ":" + std::to_string(kv.first.Mark().line + 1) + ": " +
                                              msg.substr(msg.find(dotted)));
      }
    }
    throw Error(ErrorKind::kConfig, origin + ": " + msg.substr(msg.find(": ") + 2));
  }
  return cfg;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), path.string());
}

void ApplyEnvironment(RunConfig& cfg) {
  const char* env = std::getenv("MIXITKIT_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw Error(ErrorKind::kConfig, std::string("MIXITKIT_SEED is not an integer: ") + env);
  cfg.seed = v;
}

std::vector<ConfigKeyDoc> ConfigKeys() {
  RunConfig defaults;
  std::vector<ConfigKeyDoc> out;
  for (const auto& b : Bindings()) out.push_back({b.section + "." + b.name, b.show(defaults), b.help});
  out.push_back({"seed", std::to_string(defaults.seed), "run seed; MIXITKIT_SEED overrides"});
  return out;
}

std::string ConfigHelp() {
  std::string out = "Config keys (YAML, section.key = default):\n";
  for (const auto& k : ConfigKeys()) out += fmt::format("  {:<28} = {:<12} {}\n", k.key, k.default_value, k.help);
  return out;
}

}  // namespace mixitkit
