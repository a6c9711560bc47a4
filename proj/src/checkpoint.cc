// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void Put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void PutBytes(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  void PutTensor(std::span<const double> t) {
    Put<std::uint64_t>(t.size());
    for (double v : t) Put<double>(v);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <typename T>
  T Get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorKind::kBadCheckpoint, "truncated file");
    T v{};
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void GetTensor(std::span<double> dst) {
    const auto n = Get<std::uint64_t>();
    if (n != dst.size())
      throw Error(ErrorKind::kBadCheckpoint, "tensor has " + std::to_string(n) + " elements, expected " +
                                                 std::to_string(dst.size()));
    for (double& v : dst) v = Get<double>();
  }
  std::vector<double> GetTensor() {
    const auto n = Get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw Error(ErrorKind::kBadCheckpoint, "truncated tensor");
    std::vector<double> out(n);
    for (double& v : out) v = Get<double>();
    return out;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void Seal(Writer& w) { w.Put<std::uint64_t>(Fnv1a(w.bytes())); }

// Verifies magic and trailing checksum; returns the body without the checksum.
std::span<const std::uint8_t> Unseal(std::span<const std::uint8_t> bytes, const char* magic) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), magic, 4) != 0)
    throw Error(ErrorKind::kBadCheckpoint, std::string("missing ") + magic + " magic");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != Fnv1a(body)) throw Error(ErrorKind::kBadCheckpoint, "checksum mismatch");
  return body;
}

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFile(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ChecksumHex(std::uint64_t checksum) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

std::vector<std::uint8_t> SerializeCheckpoint(const MaskNet& model) {
  const MaskNetParams& p = model.params();
  const StftConfig& s = model.stft();
  Writer meta;
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(p.channels));
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(p.embed_dim));
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(p.num_outputs));
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(p.bands.num_bands()));
  for (auto w : p.bands.widths) meta.Put<std::uint32_t>(static_cast<std::uint32_t>(w));
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(s.fft_size));
  meta.Put<std::uint32_t>(static_cast<std::uint32_t>(s.hop));
  meta.Put<std::uint8_t>(s.window == WindowType::kHann ? 0 : 1);
  meta.Put<std::uint8_t>(s.center_pad ? 1 : 0);

  Writer w;
  w.PutBytes("MXKT", 4);
  w.Put<std::uint32_t>(kCheckpointVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(meta.bytes().size()));
  w.PutBytes(reinterpret_cast<const char*>(meta.bytes().data()), meta.bytes().size());
  const auto tensors = p.tensors();
  w.Put<std::uint64_t>(tensors.size());
  for (auto t : tensors) w.PutTensor(t);
  Seal(w);
  return std::move(w.bytes());
}

MaskNet ParseCheckpoint(std::span<const std::uint8_t> bytes) {
  Reader r(Unseal(bytes, "MXKT"));
  r.Get<std::uint32_t>();  // magic
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::kBadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = r.Get<std::uint32_t>();
  const std::size_t meta_start = r.pos();
  const auto channels = r.Get<std::uint32_t>();
  const auto embed_dim = r.Get<std::uint32_t>();
  const auto num_outputs = r.Get<std::uint32_t>();
  const auto num_bands = r.Get<std::uint32_t>();
  if (num_bands == 0 || num_bands > 1u << 16) throw Error(ErrorKind::kBadCheckpoint, "bad band count");
  BandSplitConfig bands;
  for (std::uint32_t q = 0; q < num_bands; ++q) bands.widths.push_back(r.Get<std::uint32_t>());
  StftConfig stft;
  stft.fft_size = r.Get<std::uint32_t>();
  stft.hop = r.Get<std::uint32_t>();
  stft.window = r.Get<std::uint8_t>() == 0 ? WindowType::kHann : WindowType::kSqrtHann;
  stft.center_pad = r.Get<std::uint8_t>() != 0;
  if (r.pos() - meta_start != meta_len) throw Error(ErrorKind::kBadCheckpoint, "metadata length mismatch");

  MaskNetParams p;
  try {
    p = MaskNetParams::Zeros(channels, embed_dim, num_outputs, bands);
  } catch (const Error& e) {
    throw Error(ErrorKind::kBadCheckpoint, e.what());
  }
  auto tensors = p.tensors();
  if (r.Get<std::uint64_t>() != tensors.size()) throw Error(ErrorKind::kBadCheckpoint, "tensor count mismatch");
  for (auto t : tensors) r.GetTensor(t);
  try {
    return MaskNet(std::move(p), stft);
  } catch (const Error& e) {
    throw Error(ErrorKind::kBadCheckpoint, e.what());
  }
}

std::uint64_t SaveCheckpoint(const std::filesystem::path& path, const MaskNet& model) {
  const auto bytes = SerializeCheckpoint(model);
  WriteFile(path, bytes);
  std::uint64_t sum = 0;
  std::memcpy(&sum, bytes.data() + bytes.size() - 8, 8);
  return sum;
}

MaskNet LoadCheckpoint(const std::filesystem::path& path) {
  const auto bytes = ReadFile(path);
  return ParseCheckpoint(bytes);
}

std::uint64_t CheckpointChecksum(const std::filesystem::path& path) {
  const auto bytes = ReadFile(path);
  Unseal(bytes, "MXKT");
  std::uint64_t sum = 0;
  std::memcpy(&sum, bytes.data() + bytes.size() - 8, 8);
  return sum;
}

void SaveTensorFile(const std::filesystem::path& path, const std::vector<std::vector<double>>& tensors) {
  Writer w;
  w.PutBytes("MXKA", 4);
  w.Put<std::uint32_t>(kCheckpointVersion);
  w.Put<std::uint64_t>(tensors.size());
  for (const auto& t : tensors) w.PutTensor(t);
  Seal(w);
  WriteFile(path, w.bytes());
}

std::vector<std::vector<double>> LoadTensorFile(const std::filesystem::path& path) {
  const auto bytes = ReadFile(path);
  Reader r(Unseal(bytes, "MXKA"));
  r.Get<std::uint32_t>();
  if (r.Get<std::uint32_t>() != kCheckpointVersion) throw Error(ErrorKind::kBadCheckpoint, "bad version");
  const auto count = r.Get<std::uint64_t>();
  std::vector<std::vector<double>> out;
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(r.GetTensor());
  return out;
}

}  // namespace mixitkit
