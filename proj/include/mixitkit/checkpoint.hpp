// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// MXKT checkpoint layout (all integers and floats little-endian):
//
//   "MXKT" | u32 version | u32 metadata bytes | metadata | u64 tensor count |
//   { u64 element count | f64 values } ... | u64 FNV-1a of every prior byte
//
// metadata: u32 channels, u32 embed_dim, u32 num_outputs, u32 num_bands,
// u32 band widths[num_bands], u32 fft_size, u32 hop, u8 window (0 hann,
// 1 sqrt_hann), u8 center_pad. Tensors follow MaskNetParams::tensors() order.

#ifndef MIXITKIT_CHECKPOINT_HPP_
#define MIXITKIT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mixitkit/masknet.hpp"

namespace mixitkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> SerializeCheckpoint(const MaskNet& model);
MaskNet ParseCheckpoint(std::span<const std::uint8_t> bytes);

// Returns the trailing checksum written.
std::uint64_t SaveCheckpoint(const std::filesystem::path& path, const MaskNet& model);
MaskNet LoadCheckpoint(const std::filesystem::path& path);
std::uint64_t CheckpointChecksum(const std::filesystem::path& path);

std::string ChecksumHex(std::uint64_t checksum);

// Flat tensor list with the same framing and checksum but magic "MXKA"; used
// for optimizer moments.
void SaveTensorFile(const std::filesystem::path& path, const std::vector<std::vector<double>>& tensors);
std::vector<std::vector<double>> LoadTensorFile(const std::filesystem::path& path);

std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes);

}  // namespace mixitkit

#endif  // MIXITKIT_CHECKPOINT_HPP_
