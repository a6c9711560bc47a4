// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Thresholded SNR losses and the mixture-invariant training objective: a
// mixture of two mixtures is separated into N estimates, each estimate is
// assigned to one of the two parent mixtures, and the loss is the summed SNR
// loss of the two remixes under the best assignment.

#ifndef MIXITKIT_MIXIT_LOSS_HPP_
#define MIXITKIT_MIXIT_LOSS_HPP_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixitkit/audio.hpp"

namespace mixitkit {

inline constexpr double kDefaultTau = 1e-3;
inline constexpr std::size_t kMaxExhaustiveSources = 16;

// -10 log10(|y|^2 / (|y - y_hat|^2 + tau |y|^2)). Throws ZeroReference when y is silent.
double SnrLoss(const Waveform& y, const Waveform& y_hat, double tau = kDefaultTau);
// Same as SnrLoss for non-silent y. For silent y the loss measures emitted
// energy against the mixture: 10 log10(|y_hat|^2 + tau |mix|^2) - 10 log10(tau |mix|^2).
double SnrLossZeroAware(const Waveform& y, const Waveform& y_hat, const Waveform& mix,
                        double tau = kDefaultTau);
// d SnrLoss / d y_hat.
Waveform SnrLossGradient(const Waveform& y, const Waveform& y_hat, double tau = kDefaultTau);
Waveform SnrLossZeroAwareGradient(const Waveform& y, const Waveform& y_hat, const Waveform& mix,
                                  double tau = kDefaultTau);

// 2 x N binary matrix with one-hot columns, stored as the row index of each
// column. encoding() packs column n's row into bit n (bit 0 = first mixture).
class MixingMatrix {
 public:
  MixingMatrix() = default;
  explicit MixingMatrix(std::vector<std::uint8_t> rows);
  static MixingMatrix FromEncoding(std::uint64_t code, std::size_t num_sources);

  std::size_t num_sources() const { return rows_.size(); }
  std::size_t row_of(std::size_t n) const { return rows_[n]; }
  int entry(std::size_t b, std::size_t n) const { return rows_[n] == b ? 1 : 0; }
  std::uint64_t encoding() const;
  const std::vector<std::uint8_t>& rows() const { return rows_; }

  friend bool operator==(const MixingMatrix&, const MixingMatrix&) = default;

 private:
  std::vector<std::uint8_t> rows_;
};

struct MixitResult {
  double loss = 0.0;
  MixingMatrix assignment;
  std::array<Waveform, 2> remixes;
};

enum class MixitSolver { kExhaustive, kEfficient };

// [A s_hat]_b for both rows.
std::array<Waveform, 2> Remix(const MixingMatrix& a, std::span<const Waveform> s_hat);
// Summed SNR loss of the two remixes under a fixed assignment.
MixitResult EvaluateAssignment(const Waveform& x1, const Waveform& x2,
                               std::span<const Waveform> s_hat, const MixingMatrix& a,
                               double tau = kDefaultTau);

// Searches all 2^N assignments; ties go to the lowest encoding. N <= 16.
MixitResult ExhaustiveMixit(const Waveform& x1, const Waveform& x2,
                            std::span<const Waveform> s_hat, double tau = kDefaultTau);

// Unconstrained least-squares mixing matrix X S^T (S S^T + ridge I)^-1 via a
// Cholesky solve of the N x N Gram matrix. Default ridge: 1e-8 trace(S S^T) / N.
Eigen::Matrix<double, 2, Eigen::Dynamic> LeastSquaresMix(
    const Waveform& x1, const Waveform& x2, std::span<const Waveform> s_hat,
    std::optional<double> ridge = std::nullopt);

// Column-wise argmax; an exact tie goes to the first row.
MixingMatrix ProjectBinary(const Eigen::Matrix<double, 2, Eigen::Dynamic>& a_real);

MixitResult EfficientMixit(const Waveform& x1, const Waveform& x2,
                           std::span<const Waveform> s_hat, double tau = kDefaultTau,
                           std::optional<double> ridge = std::nullopt);

struct MixitGradient {
  MixitResult result;
  std::vector<Waveform> d_estimates;  // dL / d s_hat_n, assignment held fixed
};

MixitGradient MixitLossGradient(const Waveform& x1, const Waveform& x2,
                                std::span<const Waveform> s_hat, double tau, MixitSolver mode,
                                std::optional<double> ridge = std::nullopt);

}  // namespace mixitkit

#endif  // MIXITKIT_MIXIT_LOSS_HPP_
