// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/separator.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mixitkit/error.hpp"

namespace mixitkit {

std::size_t BandSplitConfig::total() const {
  return std::accumulate(widths.begin(), widths.end(), std::size_t{0});
}

std::vector<std::size_t> BandSplitConfig::offsets() const {
  std::vector<std::size_t> out(widths.size(), 0);
  for (std::size_t q = 1; q < widths.size(); ++q) out[q] = out[q - 1] + widths[q - 1];
  return out;
}

void BandSplitConfig::Validate(std::size_t bins) const {
  if (widths.empty()) throw Error(ErrorKind::kBandMismatch, "no bands configured");
  for (std::size_t q = 0; q < widths.size(); ++q)
    if (widths[q] == 0)
      throw Error(ErrorKind::kBandMismatch, "band " + std::to_string(q) + " has zero width");
  if (total() != bins)
    throw Error(ErrorKind::kBandMismatch, "band widths sum to " + std::to_string(total()) +
                                              ", expected " + std::to_string(bins) + " bins");
}

BandSplitConfig GeometricBands(std::size_t bins, std::size_t num_bands) {
  if (num_bands == 0 || num_bands > bins)
    throw Error(ErrorKind::kBandMismatch, "cannot split " + std::to_string(bins) + " bins into " +
                                              std::to_string(num_bands) + " bands");
  // Edges at bins^(q/Q), forced strictly increasing while leaving room for the
  // remaining bands.
  std::vector<std::size_t> edges(num_bands + 1, 0);
  edges[num_bands] = bins;
  for (std::size_t q = 1; q < num_bands; ++q) {
    const double target =
        std::pow(static_cast<double>(bins), static_cast<double>(q) / static_cast<double>(num_bands));
    auto e = static_cast<std::size_t>(std::llround(target));
    e = std::max(e, edges[q - 1] + 1);
    e = std::min(e, bins - (num_bands - q));
    edges[q] = e;
  }
  BandSplitConfig cfg;
  for (std::size_t q = 0; q < num_bands; ++q) cfg.widths.push_back(edges[q + 1] - edges[q]);
  return cfg;
}

std::vector<Spectrogram> BandSplit(const Spectrogram& spec, const BandSplitConfig& cfg) {
  cfg.Validate(spec.bins());
  const auto offsets = cfg.offsets();
  std::vector<Spectrogram> bands;
  bands.reserve(cfg.num_bands());
  for (std::size_t q = 0; q < cfg.num_bands(); ++q) {
    Spectrogram band(spec.channels(), spec.frames(), cfg.widths[q], spec.sample_rate());
    for (std::size_t m = 0; m < spec.channels(); ++m)
      for (std::size_t t = 0; t < spec.frames(); ++t)
        for (std::size_t k = 0; k < cfg.widths[q]; ++k) {
          band.re(m, t, k) = spec.re(m, t, offsets[q] + k);
          band.im(m, t, k) = spec.im(m, t, offsets[q] + k);
        }
    bands.push_back(std::move(band));
  }
  return bands;
}

Spectrogram Reassemble(const std::vector<Spectrogram>& bands) {
  if (bands.empty()) throw Error(ErrorKind::kBandMismatch, "no bands to reassemble");
  std::size_t bins = 0;
  for (const auto& b : bands) {
    if (b.channels() != bands[0].channels() || b.frames() != bands[0].frames())
      throw Error(ErrorKind::kBandMismatch, "band shapes disagree");
    bins += b.bins();
  }
  Spectrogram out(bands[0].channels(), bands[0].frames(), bins, bands[0].sample_rate());
  std::size_t offset = 0;
  for (const auto& b : bands) {
    for (std::size_t m = 0; m < b.channels(); ++m)
      for (std::size_t t = 0; t < b.frames(); ++t)
        for (std::size_t k = 0; k < b.bins(); ++k) {
          out.re(m, t, offset + k) = b.re(m, t, k);
          out.im(m, t, offset + k) = b.im(m, t, k);
        }
    offset += b.bins();
  }
  return out;
}

}  // namespace mixitkit
