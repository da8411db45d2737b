#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu {

enum class BiasBasis { random_polynomial, legendre };

std::string to_string(BiasBasis basis);
BiasBasis parse_bias_basis(const std::string& name);

/// Generator parameters for a synthetic multiplicative bias field.
struct BiasFieldSpec {
  BiasBasis basis = BiasBasis::random_polynomial;
  int order = 4;
  double range_lo = 0.1;
  double range_hi = 1.9;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument unless 0 < lo < hi and order >= 0.
  void validate() const;
};

/// Field exp(P(u,v)) over u,v in [-1,1] (pixel centres at the ends), where P
/// has total degree <= order with coefficients uniform in (-0.5, 0.5). The
/// Legendre basis uses products L_a(u) L_b(v) instead of monomials. The result
/// is rescaled affinely so that its minimum and maximum hit the range exactly;
/// a constant field maps to the range midpoint. Shape [1,H,W].
Tensor generate_field(const BiasFieldSpec& spec, std::size_t height, std::size_t width);

/// bias * clean + N(0, noise_sigma^2). Throws std::invalid_argument for a
/// non-positive field entry, ShapeError for mismatched shapes.
Tensor corrupt(const Tensor& clean, const Tensor& field, double noise_sigma, std::uint64_t seed);

struct PhantomOptions {
  BiasFieldSpec field;
  double noise_sigma = 0.0;
};

struct Phantom {
  Tensor clean;      // [1,H,W], piecewise constant
  Tensor bias;       // [1,H,W]
  Tensor corrupted;  // [1,H,W]
  Tensor labels;     // [1,H,W], region index per pixel (0 = background)
  double noise_sigma = 0;
  std::size_t n_regions = 0;
};

/// Piecewise-constant image of n_regions labels: a background plus elliptical
/// blobs, each region with its own intensity in [0.2, 1.0], every label
/// present. The field uses options.field with its seed replaced by one derived
/// from `seed`. Deterministic in (height, width, n_regions, seed, options).
Phantom make_phantom(std::size_t height, std::size_t width, std::size_t n_regions, std::uint64_t seed,
                     const PhantomOptions& options = {});

// Mean squared interior 5-point Laplacian of a [1,H,W] or [H,W] array (no autodiff).
double laplacian_energy(const Tensor& field);

// Stateless 64-bit mixer used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace vhu
