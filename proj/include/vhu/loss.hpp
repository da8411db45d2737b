#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "vhu/tensor.hpp"

namespace vhu {

inline constexpr double kScaleFloor = 1e-12;

/// Summary of the latent Hadamard coefficients. The DC entry (0,0) of every
/// channel is excluded; n_coeffs counts the AC entries plus one, so the
/// Laplacian scale estimate is ac_abs_sum / (n_coeffs - 1).
struct LatentStats {
  double ac_abs_sum = 0;
  std::size_t n_coeffs = 2;

  // latent is [C,M,N] (or one [M,N] plane).
  static LatentStats from_latent(const Tensor& latent);
  std::size_t ac_count() const { return n_coeffs - 1; }
  double scale_mle() const { return ac_abs_sum / static_cast<double>(ac_count()); }
};

struct LossConfig {
  double delta = 1e-5;          // scale of the sparse reference posterior
  double kl_weight = 1e-8;      // epsilon
  double smooth_weight = 0.1;   // lambda
  std::optional<bool> reverse_kl;  // unset: reverse when delta < 1e-4

  bool use_reverse_kl() const { return reverse_kl.value_or(delta < 1e-4); }
  void validate() const;
};

/// Maximum-likelihood Laplacian scale of the given AC coefficients: mean |y|.
/// Throws std::invalid_argument on empty input.
double scale_mle(std::span<const double> ac_coeffs);

/// KL(q || p) between Laplace(0, f) and Laplace(0, delta) per coefficient,
/// times the AC count, with f the scale estimate floored at 1e-12:
///   forward: (N-1) (f/delta + log(delta/f) - 1)
///   reverse: (N-1) (delta/f + log(f/delta) - 1)
double kl_divergence(const LatentStats& stats, double delta, bool reverse = false);

// Differentiable pieces used in training.
Tensor ac_abs_sum(const Tensor& latent);
Tensor kl_divergence(const Tensor& ac_abs_sum, std::size_t ac_count, double delta, bool reverse);
// Mean over all entries of (a - b)^2.
Tensor mse(const Tensor& a, const Tensor& b);
/// Mean over interior pixels of the squared 5-point Laplacian of a [H,W] or
/// [1,H,W] field. Throws ShapeError unless H, W >= 3.
Tensor smoothness_penalty(const Tensor& field);

struct LossTerms {
  Tensor mse;
  Tensor kl;
  Tensor smooth;
  Tensor neg_elbo;  // mse + eps * kl
  Tensor total;     // neg_elbo + lambda * smooth
};

// -E_v = MSE(corrected, clean) + eps * KL.
Tensor elbo_loss(const Tensor& corrected, const Tensor& clean, const Tensor& latent, const LossConfig& cfg);

LossTerms total_loss(const Tensor& corrected, const Tensor& clean, const Tensor& latent, const Tensor& field,
                     const LossConfig& cfg);

}  // namespace vhu
