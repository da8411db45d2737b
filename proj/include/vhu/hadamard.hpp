#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu {

constexpr bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// Sylvester-ordered Hadamard matrix H_n (row-major), built by the block
/// recursion H_n = [[H_{n/2}, H_{n/2}], [H_{n/2}, -H_{n/2}]].
std::vector<double> hadamard_matrix(std::size_t n);

/// In-place unnormalized fast Walsh-Hadamard transform in natural order.
/// Equals multiplication by H_n. Throws ShapeError unless the length is a power of two.
void fwht(std::span<double> v);

/// Transform descriptor for H x W planes, both powers of two.
class HadamardPlan {
 public:
  HadamardPlan(std::size_t height, std::size_t width);
  static HadamardPlan for_tensor(const Tensor& x);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  // 1 / (H * W), applied by the inverse.
  double inverse_scale() const { return inverse_scale_; }

  // Y = H_H * X * H_W on one row-major plane, in place.
  void forward_plane(double* plane) const;

 private:
  std::size_t height_, width_;
  double inverse_scale_;
};

// Both accept [C,H,W] (or a single [H,W] plane) and transform each channel.
Tensor ht2d(const Tensor& x, const HadamardPlan& plan);
Tensor ht2d(const Tensor& x);
// x = (1/(H*W)) * H_H * Y * H_W per channel.
Tensor iht2d(const Tensor& y, const HadamardPlan& plan);
Tensor iht2d(const Tensor& y);

/// Trainable Hadamard-domain scaling matrix, shared over channels.
struct ScalingParams {
  Tensor theta;  // [H,W]
  static ScalingParams identity(std::size_t height, std::size_t width);
};

/// Trainable threshold; the effective value relu(t_raw) is never negative.
struct ThresholdParams {
  Tensor t_raw;  // [H,W]
  static ThresholdParams zero(std::size_t height, std::size_t width);
  Tensor effective() const;
};

// theta * X, broadcast over channels.
Tensor scale(const Tensor& x, const ScalingParams& params);

/// max(t_raw, 0). The gradient passes wherever t_raw >= 0, so a threshold
/// initialized at exactly zero can still learn to grow.
Tensor threshold_from_raw(const Tensor& t_raw);

/// Binary gate sign(relu(|X| - T)): 1 where |X| > T, else 0. Constant under
/// differentiation. T matches X or its trailing [H,W] extents.
Tensor gate(const Tensor& x, const Tensor& t);

/// Semi-soft shrinkage gate(X,T) * sign(X) * (|X| - T * exp(T - |X|)).
/// Zero on |X| <= T, continuous at the threshold, odd in X, tends to X for
/// large |X|. Gradients flow to X and T only through the non-gate factors;
/// the subgradient at |X| = T is 0.
Tensor semi_soft(const Tensor& x, const Tensor& t);

// Scalar reference used by tests and documentation.
double semi_soft_value(double x, double t);

}  // namespace vhu
