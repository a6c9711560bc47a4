// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/mixit_loss.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mixitkit/error.hpp"

namespace mixitkit {
namespace {

// 20 / ln(10): derivative scale of 10 log10(|e|^2).
constexpr double kDbGrad = 20.0 / std::numbers::ln10;

double ErrorEnergy(const Waveform& y, const Waveform& y_hat) {
  double acc = 0.0;
  const auto& a = y.samples();
  const auto& b = y_hat.samples();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void CheckSources(const Waveform& x1, const Waveform& x2, std::span<const Waveform> s_hat) {
  CheckSameShape(x1, x2, "mixit mixtures");
  if (s_hat.empty()) throw Error(ErrorKind::kShapeMismatch, "mixit needs at least one estimate");
  for (const auto& s : s_hat) CheckSameShape(x1, s, "mixit estimate");
}

}  // namespace

double SnrLoss(const Waveform& y, const Waveform& y_hat, double tau) {
  CheckSameShape(y, y_hat, "snr_loss");
  const double ref = Energy(y);
  if (!(ref > 0.0)) throw Error(ErrorKind::kZeroReference, "snr_loss reference is silent");
  return -10.0 * std::log10(ref / (ErrorEnergy(y, y_hat) + tau * ref));
}

double SnrLossZeroAware(const Waveform& y, const Waveform& y_hat, const Waveform& mix,
                        double tau) {
  CheckSameShape(y, y_hat, "snr_loss_zero_aware");
  CheckSameShape(y, mix, "snr_loss_zero_aware mixture");
  const double mix_energy = Energy(mix);
  if (!(mix_energy > 0.0)) throw Error(ErrorKind::kZeroMixture, "mixture is silent");
  if (Energy(y) > 0.0) return SnrLoss(y, y_hat, tau);
  const double floor = tau * mix_energy;
  return 10.0 * std::log10(Energy(y_hat) + floor) - 10.0 * std::log10(floor);
}

Waveform SnrLossGradient(const Waveform& y, const Waveform& y_hat, double tau) {
  CheckSameShape(y, y_hat, "snr_loss");
  const double ref = Energy(y);
  if (!(ref > 0.0)) throw Error(ErrorKind::kZeroReference, "snr_loss reference is silent");
  const double scale = kDbGrad / (ErrorEnergy(y, y_hat) + tau * ref);
  Waveform g = y_hat;
  auto& out = g.samples();
  const auto& ref_s = y.samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * (out[i] - ref_s[i]);
  return g;
}

Waveform SnrLossZeroAwareGradient(const Waveform& y, const Waveform& y_hat, const Waveform& mix,
                                  double tau) {
  CheckSameShape(y, y_hat, "snr_loss_zero_aware");
  CheckSameShape(y, mix, "snr_loss_zero_aware mixture");
  const double mix_energy = Energy(mix);
  if (!(mix_energy > 0.0)) throw Error(ErrorKind::kZeroMixture, "mixture is silent");
  if (Energy(y) > 0.0) return SnrLossGradient(y, y_hat, tau);
  const double scale = kDbGrad / (Energy(y_hat) + tau * mix_energy);
  Waveform g = y_hat;
  for (double& v : g.samples()) v *= scale;
  return g;
}

MixingMatrix::MixingMatrix(std::vector<std::uint8_t> rows) : rows_(std::move(rows)) {
  for (auto r : rows_)
    if (r > 1) throw Error(ErrorKind::kShapeMismatch, "mixing matrix row index must be 0 or 1");
}

MixingMatrix MixingMatrix::FromEncoding(std::uint64_t code, std::size_t num_sources) {
  std::vector<std::uint8_t> rows(num_sources);
  for (std::size_t n = 0; n < num_sources; ++n) rows[n] = static_cast<std::uint8_t>((code >> n) & 1u);
  return MixingMatrix(std::move(rows));
}

std::uint64_t MixingMatrix::encoding() const {
  std::uint64_t code = 0;
  for (std::size_t n = 0; n < rows_.size(); ++n) code |= static_cast<std::uint64_t>(rows_[n]) << n;
  return code;
}

std::array<Waveform, 2> Remix(const MixingMatrix& a, std::span<const Waveform> s_hat) {
  if (a.num_sources() != s_hat.size())
    throw Error(ErrorKind::kShapeMismatch, "assignment has " + std::to_string(a.num_sources()) +
                                               " columns for " + std::to_string(s_hat.size()) +
                                               " estimates");
  const Waveform& proto = s_hat.front();
  std::array<Waveform, 2> out{Waveform(proto.channels(), proto.length(), proto.sample_rate()),
                              Waveform(proto.channels(), proto.length(), proto.sample_rate())};
  for (std::size_t n = 0; n < s_hat.size(); ++n) AddInPlace(out[a.row_of(n)], s_hat[n]);
  return out;
}

MixitResult EvaluateAssignment(const Waveform& x1, const Waveform& x2,
                               std::span<const Waveform> s_hat, const MixingMatrix& a,
                               double tau) {
  CheckSources(x1, x2, s_hat);
  MixitResult r;
  r.assignment = a;
  r.remixes = Remix(a, s_hat);
  r.loss = SnrLoss(x1, r.remixes[0], tau) + SnrLoss(x2, r.remixes[1], tau);
  return r;
}

MixitResult ExhaustiveMixit(const Waveform& x1, const Waveform& x2,
                            std::span<const Waveform> s_hat, double tau) {
  CheckSources(x1, x2, s_hat);
  const std::size_t n_src = s_hat.size();
  if (n_src > kMaxExhaustiveSources)
    throw Error(ErrorKind::kTooManySources,
                std::to_string(n_src) + " estimates exceed the exhaustive limit of 16");
  const std::array<const Waveform*, 2> refs{&x1, &x2};
  std::array<double, 2> ref_energy{};
  for (std::size_t b = 0; b < 2; ++b) {
    ref_energy[b] = Energy(*refs[b]);
    if (!(ref_energy[b] > 0.0)) throw Error(ErrorKind::kZeroReference, "parent mixture is silent");
  }

  // Expand |x_b - sum_{n in S_b} s_n|^2 through inner products so each
  // candidate costs O(N^2) instead of O(N L).
  Eigen::MatrixXd gram(n_src, n_src);
  Eigen::Matrix<double, 2, Eigen::Dynamic> cross(2, n_src);
  for (std::size_t n = 0; n < n_src; ++n) {
    for (std::size_t k = n; k < n_src; ++k) gram(n, k) = gram(k, n) = Dot(s_hat[n], s_hat[k]);
    for (std::size_t b = 0; b < 2; ++b) cross(b, n) = Dot(*refs[b], s_hat[n]);
  }

  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_code = 0;
  const std::uint64_t total = std::uint64_t{1} << n_src;
  std::vector<std::size_t> members;
  members.reserve(n_src);
  for (std::uint64_t code = 0; code < total; ++code) {
    double loss = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      members.clear();
      for (std::size_t n = 0; n < n_src; ++n)
        if (((code >> n) & 1u) == b) members.push_back(n);
      double err = ref_energy[b];
      for (std::size_t i : members) {
        err -= 2.0 * cross(b, i);
        for (std::size_t j : members) err += gram(i, j);
      }
      err = std::max(err, 0.0);
      loss += -10.0 * std::log10(ref_energy[b] / (err + tau * ref_energy[b]));
    }
    if (loss < best) {
      best = loss;
      best_code = code;
    }
  }
  return EvaluateAssignment(x1, x2, s_hat, MixingMatrix::FromEncoding(best_code, n_src), tau);
}

Eigen::Matrix<double, 2, Eigen::Dynamic> LeastSquaresMix(const Waveform& x1, const Waveform& x2,
                                                         std::span<const Waveform> s_hat,
                                                         std::optional<double> ridge) {
  CheckSources(x1, x2, s_hat);
  const auto n_src = static_cast<Eigen::Index>(s_hat.size());
  Eigen::MatrixXd gram(n_src, n_src);
  Eigen::MatrixXd rhs(n_src, 2);
  for (Eigen::Index n = 0; n < n_src; ++n) {
    for (Eigen::Index k = n; k < n_src; ++k) gram(n, k) = gram(k, n) = Dot(s_hat[n], s_hat[k]);
    rhs(n, 0) = Dot(s_hat[n], x1);
    rhs(n, 1) = Dot(s_hat[n], x2);
  }
  const double lambda = ridge.value_or(1e-8 * gram.trace() / static_cast<double>(n_src));
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kSingularGram, "ridge must be non-negative");
  gram.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::kSingularGram, "Cholesky of the estimate Gram matrix failed");
  const Eigen::MatrixXd solution = llt.solve(rhs);
  if (!solution.allFinite())
    throw Error(ErrorKind::kSingularGram, "least-squares mixing matrix is not finite");
  return solution.transpose();
}

MixingMatrix ProjectBinary(const Eigen::Matrix<double, 2, Eigen::Dynamic>& a_real) {
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(a_real.cols()));
  for (Eigen::Index n = 0; n < a_real.cols(); ++n)
    rows[static_cast<std::size_t>(n)] = a_real(0, n) >= a_real(1, n) ? 0 : 1;
  return MixingMatrix(std::move(rows));
}

MixitResult EfficientMixit(const Waveform& x1, const Waveform& x2,
                           std::span<const Waveform> s_hat, double tau,
                           std::optional<double> ridge) {
  const auto a_real = LeastSquaresMix(x1, x2, s_hat, ridge);
  return EvaluateAssignment(x1, x2, s_hat, ProjectBinary(a_real), tau);
}

MixitGradient MixitLossGradient(const Waveform& x1, const Waveform& x2,
                                std::span<const Waveform> s_hat, double tau, MixitSolver mode,
                                std::optional<double> ridge) {
  MixitGradient out;
  out.result = mode == MixitSolver::kExhaustive ? ExhaustiveMixit(x1, x2, s_hat, tau)
                                                : EfficientMixit(x1, x2, s_hat, tau, ridge);
  const std::array<Waveform, 2> d_remix{SnrLossGradient(x1, out.result.remixes[0], tau),
                                        SnrLossGradient(x2, out.result.remixes[1], tau)};
  out.d_estimates.reserve(s_hat.size());
  for (std::size_t n = 0; n < s_hat.size(); ++n)
    out.d_estimates.push_back(d_remix[out.result.assignment.row_of(n)]);
  return out;
}

}  // namespace mixitkit
