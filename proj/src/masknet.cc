// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/masknet.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

template <typename Span>
void Fnv(std::uint64_t& h, Span values) {
  for (double v : values) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
}

}  // namespace

MaskNetParams MaskNetParams::Zeros(std::size_t channels, std::size_t embed_dim,
                                   std::size_t num_outputs, const BandSplitConfig& bands) {
  if (channels == 0 || embed_dim == 0 || num_outputs == 0)
    throw Error(ErrorKind::kShapeMismatch, "model dimensions must be positive");
  MaskNetParams p;
  p.channels = channels;
  p.embed_dim = embed_dim;
  p.num_outputs = num_outputs;
  p.bands = bands;
  const auto d = static_cast<Eigen::Index>(embed_dim);
  for (std::size_t q = 0; q < bands.num_bands(); ++q) {
    const auto in = static_cast<Eigen::Index>(p.block_rows(q));
    p.encoder.push_back(MatrixXd::Zero(d, in));
    p.norm_scale.push_back(VectorXd::Zero(in));
    p.norm_shift.push_back(VectorXd::Zero(in));
    p.decoder.push_back(MatrixXd::Zero(in * static_cast<Eigen::Index>(num_outputs), d));
    p.decoder_bias.push_back(VectorXd::Zero(in * static_cast<Eigen::Index>(num_outputs)));
  }
  p.hidden = MatrixXd::Zero(d, d);
  p.hidden_bias = VectorXd::Zero(d);
  return p;
}

MaskNetParams MaskNetParams::ZerosLike() const {
  return Zeros(channels, embed_dim, num_outputs, bands);
}

std::vector<std::span<double>> MaskNetParams::tensors() {
  std::vector<std::span<double>> out;
  auto add = [&out](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
  for (auto& t : encoder) add(t);
  for (auto& t : norm_scale) add(t);
  for (auto& t : norm_shift) add(t);
  add(hidden);
  add(hidden_bias);
  for (auto& t : decoder) add(t);
  for (auto& t : decoder_bias) add(t);
  return out;
}

std::vector<std::span<const double>> MaskNetParams::tensors() const {
  auto views = const_cast<MaskNetParams*>(this)->tensors();
  return {views.begin(), views.end()};
}

std::size_t MaskNetParams::size() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::uint64_t MaskNetParams::Fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto t : tensors()) Fnv(h, t);
  return h;
}

void MaskNetParams::Validate() const {
  const auto q_count = bands.num_bands();
  const auto d = static_cast<Eigen::Index>(embed_dim);
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kShapeMismatch, what); };
  if (q_count == 0) fail("model has no bands");
  if (encoder.size() != q_count || norm_scale.size() != q_count || norm_shift.size() != q_count ||
      decoder.size() != q_count || decoder_bias.size() != q_count)
    fail("per-band tensor count does not match band count");
  for (std::size_t q = 0; q < q_count; ++q) {
    const auto in = static_cast<Eigen::Index>(block_rows(q));
    const auto out = in * static_cast<Eigen::Index>(num_outputs);
    if (encoder[q].rows() != d || encoder[q].cols() != in) fail("encoder shape, band " + std::to_string(q));
    if (norm_scale[q].size() != in || norm_shift[q].size() != in) fail("norm shape, band " + std::to_string(q));
    if (decoder[q].rows() != out || decoder[q].cols() != d) fail("decoder shape, band " + std::to_string(q));
    if (decoder_bias[q].size() != out) fail("decoder bias shape, band " + std::to_string(q));
  }
  if (hidden.rows() != d || hidden.cols() != d || hidden_bias.size() != d) fail("hidden shape");
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) fail("non-finite parameter");
}

MaskNetParams InitParams(std::uint64_t seed, std::size_t embed_dim, std::size_t num_outputs,
                         std::size_t channels, const BandSplitConfig& bands, double scale) {
  MaskNetParams p = MaskNetParams::Zeros(channels, embed_dim, num_outputs, bands);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](auto& t, double stddev) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = stddev * normal(rng);
  };
  const double d = static_cast<double>(embed_dim);
  for (std::size_t q = 0; q < bands.num_bands(); ++q) {
    fill(p.encoder[q], 1.0 / std::sqrt(static_cast<double>(p.block_rows(q))));
    p.norm_scale[q].setOnes();
  }
  fill(p.hidden, 1.0 / std::sqrt(d));
  const double even_split = std::atanh(1.0 / static_cast<double>(num_outputs) - 1.0);
  for (std::size_t q = 0; q < bands.num_bands(); ++q) {
    fill(p.decoder[q], scale / std::sqrt(d));
    const auto blk = static_cast<Eigen::Index>(p.block_rows(q));
    const auto half = blk / 2;
    for (std::size_t n = 0; n < num_outputs; ++n) {
      auto block = p.decoder_bias[q].segment(static_cast<Eigen::Index>(n) * blk, blk);
      block.head(half).setConstant(even_split);
      block.tail(half).setZero();
    }
  }
  return p;
}

MaskNetParams RestrictOutputs(const MaskNetParams& params, std::span<const std::size_t> keep) {
  if (keep.empty()) throw Error(ErrorKind::kInvalidSelection, "no outputs selected");
  std::vector<bool> seen(params.num_outputs, false);
  for (std::size_t n : keep) {
    if (n >= params.num_outputs)
      throw Error(ErrorKind::kInvalidSelection, "output " + std::to_string(n) + " out of range for " +
                                                    std::to_string(params.num_outputs) + " outputs");
    if (seen[n]) throw Error(ErrorKind::kInvalidSelection, "output " + std::to_string(n) + " selected twice");
    seen[n] = true;
  }
  MaskNetParams out = params;
  out.num_outputs = keep.size();
  for (std::size_t q = 0; q < params.bands.num_bands(); ++q) {
    const auto blk = static_cast<Eigen::Index>(params.block_rows(q));
    MatrixXd dec(blk * static_cast<Eigen::Index>(keep.size()), params.decoder[q].cols());
    VectorXd bias(blk * static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const auto src = static_cast<Eigen::Index>(keep[i]) * blk;
      const auto dst = static_cast<Eigen::Index>(i) * blk;
      dec.middleRows(dst, blk) = params.decoder[q].middleRows(src, blk);
      bias.segment(dst, blk) = params.decoder_bias[q].segment(src, blk);
    }
    out.decoder[q] = std::move(dec);
    out.decoder_bias[q] = std::move(bias);
  }
  return out;
}

MaskNet::MaskNet(MaskNetParams params, StftConfig stft)
    : params_(std::move(params)), stft_(stft) {
  stft_.Validate();
  params_.bands.Validate(stft_.bins());
  params_.Validate();
}

std::vector<Waveform> MaskNet::Separate(const Waveform& mixture) const {
  return Forward(mixture).estimates;
}

MaskNet::Output MaskNet::Forward(const Waveform& mixture) const {
  const MaskNetParams& p = params_;
  if (mixture.channels() != p.channels)
    throw Error(ErrorKind::kShapeMismatch, "model expects " + std::to_string(p.channels) +
                                               " channels, got " + std::to_string(mixture.channels()));
  Output out;
  Cache& cache = out.cache;
  cache.params_fingerprint = p.Fingerprint();
  cache.length = mixture.length();
  cache.mixture_spec = Stft(mixture, stft_);
  const Spectrogram& x = cache.mixture_spec;
  const std::size_t frames = x.frames();
  const std::size_t m_count = p.channels;
  const auto t_count = static_cast<Eigen::Index>(frames);
  const auto offsets = p.bands.offsets();

  std::vector<Spectrogram> masked(p.num_outputs, Spectrogram(m_count, frames, x.bins(), x.sample_rate()));
  cache.bands.resize(p.bands.num_bands());
  for (std::size_t q = 0; q < p.bands.num_bands(); ++q) {
    BandCache& bc = cache.bands[q];
    const std::size_t width = p.bands.widths[q];
    const auto blk = static_cast<Eigen::Index>(p.block_rows(q));

    MatrixXd v(blk, t_count);
    for (std::size_t ri = 0; ri < 2; ++ri)
      for (std::size_t m = 0; m < m_count; ++m)
        for (std::size_t k = 0; k < width; ++k) {
          const auto row = static_cast<Eigen::Index>((ri * m_count + m) * width + k);
          for (std::size_t t = 0; t < frames; ++t)
            v(row, static_cast<Eigen::Index>(t)) = x.values()[x.index(ri, m, t, offsets[q] + k)];
        }
    const double mean = v.mean();
    const double var = (v.array() - mean).square().mean();
    bc.normalized = (v.array() - mean) / std::sqrt(var + kNormEps);
    bc.affine = (bc.normalized.array().colwise() * p.norm_scale[q].array()).colwise() +
                p.norm_shift[q].array();
    bc.embedding = p.encoder[q] * bc.affine;
    bc.hidden = ((p.hidden * bc.embedding).colwise() + p.hidden_bias).array().tanh();

    bc.mask_tanh.resize(p.num_outputs);
    for (std::size_t n = 0; n < p.num_outputs; ++n) {
      // Copy the output's block so the product is computed identically no
      // matter how many outputs the model carries.
      const MatrixXd g = p.decoder[q].middleRows(static_cast<Eigen::Index>(n) * blk, blk);
      const VectorXd gb = p.decoder_bias[q].segment(static_cast<Eigen::Index>(n) * blk, blk);
      bc.mask_tanh[n] = ((g * bc.hidden).colwise() + gb).array().tanh();
      const MatrixXd& tz = bc.mask_tanh[n];
      Spectrogram& s = masked[n];
      for (std::size_t m = 0; m < m_count; ++m)
        for (std::size_t k = 0; k < width; ++k) {
          const auto row_re = static_cast<Eigen::Index>(m * width + k);
          const auto row_im = static_cast<Eigen::Index>((m_count + m) * width + k);
          const std::size_t f = offsets[q] + k;
          for (std::size_t t = 0; t < frames; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            const double a = 1.0 + tz(row_re, tt);
            const double b = tz(row_im, tt);
            const double xr = x.re(m, t, f);
            const double xi = x.im(m, t, f);
            s.re(m, t, f) = a * xr - b * xi;
            s.im(m, t, f) = a * xi + b * xr;
          }
        }
    }
  }

  out.estimates.reserve(p.num_outputs);
  for (std::size_t n = 0; n < p.num_outputs; ++n)
    out.estimates.push_back(Istft(masked[n], stft_, mixture.length()));
  return out;
}

MaskNetParams MaskNet::Backward(const Cache& cache, std::span<const Waveform> upstream) const {
  const MaskNetParams& p = params_;
  if (cache.params_fingerprint != p.Fingerprint())
    throw Error(ErrorKind::kStaleCache, "parameters changed since the forward pass");
  if (upstream.size() != p.num_outputs)
    throw Error(ErrorKind::kShapeMismatch, "expected " + std::to_string(p.num_outputs) +
                                               " upstream gradients, got " + std::to_string(upstream.size()));
  if (cache.bands.size() != p.bands.num_bands())
    throw Error(ErrorKind::kStaleCache, "cache was produced by a different model");

  const Spectrogram& x = cache.mixture_spec;
  const std::size_t frames = x.frames();
  const std::size_t m_count = p.channels;
  const auto offsets = p.bands.offsets();

  std::vector<Spectrogram> d_spec;
  d_spec.reserve(p.num_outputs);
  for (const auto& u : upstream) {
    if (u.channels() != m_count || u.length() != cache.length)
      throw Error(ErrorKind::kShapeMismatch, "upstream gradient shape does not match forward input");
    d_spec.push_back(IstftAdjoint(u, stft_));
  }

  MaskNetParams grad = p.ZerosLike();
  for (std::size_t q = 0; q < p.bands.num_bands(); ++q) {
    const BandCache& bc = cache.bands[q];
    const std::size_t width = p.bands.widths[q];
    const auto blk = static_cast<Eigen::Index>(p.block_rows(q));
    const auto t_count = static_cast<Eigen::Index>(frames);

    MatrixXd d_hidden = MatrixXd::Zero(static_cast<Eigen::Index>(p.embed_dim), t_count);
    MatrixXd d_pre_mask(blk, t_count);
    for (std::size_t n = 0; n < p.num_outputs; ++n) {
      const MatrixXd& tz = bc.mask_tanh[n];
      const Spectrogram& g = d_spec[n];
      for (std::size_t m = 0; m < m_count; ++m)
        for (std::size_t k = 0; k < width; ++k) {
          const auto row_re = static_cast<Eigen::Index>(m * width + k);
          const auto row_im = static_cast<Eigen::Index>((m_count + m) * width + k);
          const std::size_t f = offsets[q] + k;
          for (std::size_t t = 0; t < frames; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            const double gr = g.re(m, t, f);
            const double gi = g.im(m, t, f);
            const double xr = x.re(m, t, f);
            const double xi = x.im(m, t, f);
            const double da = gr * xr + gi * xi;
            const double db = -gr * xi + gi * xr;
            const double tr = tz(row_re, tt);
            const double ti = tz(row_im, tt);
            d_pre_mask(row_re, tt) = da * (1.0 - tr * tr);
            d_pre_mask(row_im, tt) = db * (1.0 - ti * ti);
          }
        }
      const auto row0 = static_cast<Eigen::Index>(n) * blk;
      grad.decoder[q].middleRows(row0, blk).noalias() = d_pre_mask * bc.hidden.transpose();
      grad.decoder_bias[q].segment(row0, blk) = d_pre_mask.rowwise().sum();
      const MatrixXd gblock = p.decoder[q].middleRows(row0, blk);
      d_hidden.noalias() += gblock.transpose() * d_pre_mask;
    }

    const MatrixXd d_pre_hidden = d_hidden.array() * (1.0 - bc.hidden.array().square());
    grad.hidden.noalias() += d_pre_hidden * bc.embedding.transpose();
    grad.hidden_bias += d_pre_hidden.rowwise().sum();
    const MatrixXd d_embedding = p.hidden.transpose() * d_pre_hidden;
    grad.encoder[q].noalias() = d_embedding * bc.affine.transpose();
    const MatrixXd d_affine = p.encoder[q].transpose() * d_embedding;
    grad.norm_scale[q] = (d_affine.array() * bc.normalized.array()).rowwise().sum();
    grad.norm_shift[q] = d_affine.rowwise().sum();
  }
  return grad;
}

}  // namespace mixitkit
