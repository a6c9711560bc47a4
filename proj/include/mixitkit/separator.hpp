// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIXITKIT_SEPARATOR_HPP_
#define MIXITKIT_SEPARATOR_HPP_

#include <cstddef>
#include <vector>

#include "mixitkit/audio.hpp"
#include "mixitkit/stft.hpp"

namespace mixitkit {

// Maps one mixture to num_outputs() estimates, each with the mixture's
// channel count, length and sample rate.
class Separator {
 public:
  virtual ~Separator() = default;
  virtual std::size_t num_outputs() const = 0;
  virtual std::vector<Waveform> Separate(const Waveform& mixture) const = 0;
};

// Contiguous, non-overlapping subbands covering every STFT bin.
struct BandSplitConfig {
  std::vector<std::size_t> widths;

  std::size_t num_bands() const { return widths.size(); }
  std::size_t total() const;
  std::vector<std::size_t> offsets() const;
  // Throws BandMismatch unless every width is >= 1 and they sum to `bins`.
  void Validate(std::size_t bins) const;

  friend bool operator==(const BandSplitConfig&, const BandSplitConfig&) = default;
};

// Widths that grow roughly geometrically from low to high frequency.
BandSplitConfig GeometricBands(std::size_t bins, std::size_t num_bands);

std::vector<Spectrogram> BandSplit(const Spectrogram& spec, const BandSplitConfig& cfg);
Spectrogram Reassemble(const std::vector<Spectrogram>& bands);

}  // namespace mixitkit

#endif  // MIXITKIT_SEPARATOR_HPP_
