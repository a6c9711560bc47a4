// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// YAML run configuration: sections data, stft, model, pretrain, finetune and
// eval plus a top-level seed.

#ifndef MIXITKIT_TOOLS_CONFIG_HPP_
#define MIXITKIT_TOOLS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixitkit/data_pipeline.hpp"
#include "mixitkit/evaluation.hpp"
#include "mixitkit/separator.hpp"
#include "mixitkit/stft.hpp"
#include "mixitkit/training.hpp"

namespace mixitkit {

struct DataConfig {
  PrepareOptions prepare;
  bool use_sad = false;
  SadOptions sad;
};

struct ModelConfig {
  std::size_t channels = 1;
  std::size_t embed_dim = 32;
  std::size_t num_outputs = 12;
  std::size_t num_bands = 16;
  std::vector<std::size_t> band_widths;  // empty: geometric split into num_bands
  double init_scale = 0.05;

  BandSplitConfig Bands(std::size_t bins) const;
};

struct PhaseConfig {
  TrainConfig train;
  std::size_t checkpoint_every = 0;
};

struct RunConfig {
  DataConfig data;
  StftConfig stft;
  ModelConfig model;
  PhaseConfig pretrain;
  PhaseConfig finetune;
  double select_chunk_s = 6.0;
  EvalOptions eval;
  std::uint64_t seed = 0;

  RunConfig();
  // Cross-section checks: STFT validity, band widths covering every bin,
  // N >= 4, schedule ranges. Throws Error(kConfig).
  void Validate() const;
};

// Unknown keys and malformed values are reported as "<file>:<line>: ...".
RunConfig LoadConfig(const std::filesystem::path& path);
RunConfig ParseConfig(const std::string& text, const std::string& origin = "<config>");
// Applies MIXITKIT_SEED when set.
void ApplyEnvironment(RunConfig& cfg);

struct ConfigKeyDoc {
  std::string key;  // section.name
  std::string default_value;
  std::string help;
};
std::vector<ConfigKeyDoc> ConfigKeys();
std::string ConfigHelp();

}  // namespace mixitkit

#endif  // MIXITKIT_TOOLS_CONFIG_HPP_
