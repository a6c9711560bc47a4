// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// MaskNet: a small band-split mask estimator with a hand-derived backward pass.
//
//   mixture -> STFT -> per-band flatten (RI x channel x bin) -> per-band
//   normalization with learned affine -> E_q -> tanh(W z + c) -> G_q ->
//   complex mask (1 + tanh(real), tanh(imag)) per output -> iSTFT
//
// Every frame and band is processed independently; the hidden layer W is
// shared across bands.

#ifndef MIXITKIT_MASKNET_HPP_
#define MIXITKIT_MASKNET_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "mixitkit/separator.hpp"
#include "mixitkit/stft.hpp"

namespace mixitkit {

struct MaskNetParams {
  std::size_t channels = 1;     // M
  std::size_t embed_dim = 32;   // D
  std::size_t num_outputs = 4;  // N
  BandSplitConfig bands;

  std::vector<Eigen::MatrixXd> encoder;     // per band: D x (2 M b_q)
  std::vector<Eigen::VectorXd> norm_scale;  // per band: 2 M b_q
  std::vector<Eigen::VectorXd> norm_shift;  // per band: 2 M b_q
  Eigen::MatrixXd hidden;                   // D x D
  Eigen::VectorXd hidden_bias;              // D
  std::vector<Eigen::MatrixXd> decoder;     // per band: (N 2 M b_q) x D
  std::vector<Eigen::VectorXd> decoder_bias;

  // Rows of one output's block in decoder[q]: (real|imag, channel, bin).
  std::size_t block_rows(std::size_t q) const { return 2 * channels * bands.widths[q]; }

  // Allocates zero tensors of the right shapes.
  static MaskNetParams Zeros(std::size_t channels, std::size_t embed_dim, std::size_t num_outputs,
                             const BandSplitConfig& bands);
  MaskNetParams ZerosLike() const;

  // Views over every tensor in declaration order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t size() const;
  std::uint64_t Fingerprint() const;
  // Throws ShapeMismatch if tensors disagree with the metadata or are non-finite.
  void Validate() const;
};

// Encoder and hidden weights ~ N(0, 1/fan_in); decoder weights ~ N(0,
// scale^2 / D). Decoder biases start every output at mask 1/N so the initial
// outputs split the mixture evenly.
MaskNetParams InitParams(std::uint64_t seed, std::size_t embed_dim, std::size_t num_outputs,
                         std::size_t channels, const BandSplitConfig& bands, double scale = 0.05);

// Keeps the listed outputs, in the listed order.
MaskNetParams RestrictOutputs(const MaskNetParams& params, std::span<const std::size_t> keep);

class MaskNet : public Separator {
 public:
  struct BandCache {
    Eigen::MatrixXd normalized;  // (2 M b_q) x T, before the affine
    Eigen::MatrixXd affine;      // encoder input
    Eigen::MatrixXd embedding;   // D x T
    Eigen::MatrixXd hidden;      // D x T, post-tanh
    std::vector<Eigen::MatrixXd> mask_tanh;  // per output: (2 M b_q) x T
  };
  struct Cache {
    std::uint64_t params_fingerprint = 0;
    std::size_t length = 0;
    Spectrogram mixture_spec;
    std::vector<BandCache> bands;
  };
  struct Output {
    std::vector<Waveform> estimates;
    Cache cache;
  };

  MaskNet(MaskNetParams params, StftConfig stft);

  std::size_t num_outputs() const override { return params_.num_outputs; }
  std::vector<Waveform> Separate(const Waveform& mixture) const override;

  Output Forward(const Waveform& mixture) const;
  // Parameter gradients for upstream = dL/d estimates. Throws StaleCache if
  // the parameters changed since the forward pass that produced `cache`.
  MaskNetParams Backward(const Cache& cache, std::span<const Waveform> upstream) const;

  const MaskNetParams& params() const { return params_; }
  MaskNetParams& mutable_params() { return params_; }
  const StftConfig& stft() const { return stft_; }

 private:
  MaskNetParams params_;
  StftConfig stft_;
};

inline constexpr double kNormEps = 1e-10;

}  // namespace mixitkit

#endif  // MIXITKIT_MASKNET_HPP_
