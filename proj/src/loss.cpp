#include "vhu/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "autograd.hpp"
#include "vhu/ops.hpp"

namespace vhu {

namespace {

struct PlaneLayout {
  std::size_t channels, plane;
};

PlaneLayout latent_layout(const Tensor& latent) {
  if (latent.ndim() == 2) return {1, latent.numel()};
  if (latent.ndim() == 3) return {latent.dim(0), latent.dim(1) * latent.dim(2)};
  throw ShapeError("latent must be [C,M,N] or [M,N], got " + shape_str(latent.shape()));
}

Tensor ac_mask(const Tensor& latent) {
  const auto [c, plane] = latent_layout(latent);
  std::vector<double> m(latent.numel(), 1.0);
  for (std::size_t ch = 0; ch < c; ++ch) m[ch * plane] = 0.0;
  return Tensor(latent.shape(), std::move(m));
}

}  // namespace

LatentStats LatentStats::from_latent(const Tensor& latent) {
  const auto [c, plane] = latent_layout(latent);
  if (plane < 2) throw ShapeError("latent planes need at least one AC coefficient");
  const auto v = latent.values();
  double s = 0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 1; i < plane; ++i) s += std::fabs(v[ch * plane + i]);
  return {s, c * (plane - 1) + 1};
}

void LossConfig::validate() const {
  if (!(delta > 0)) throw std::invalid_argument("loss: delta must be positive");
  if (kl_weight < 0 || smooth_weight < 0) throw std::invalid_argument("loss: weights must be nonnegative");
}

double scale_mle(std::span<const double> ac_coeffs) {
  if (ac_coeffs.empty()) throw std::invalid_argument("scale_mle: no AC coefficients");
  double s = 0;
  for (double y : ac_coeffs) s += std::fabs(y);
  return s / static_cast<double>(ac_coeffs.size());
}

double kl_divergence(const LatentStats& stats, double delta, bool reverse) {
  if (stats.n_coeffs < 2) throw std::invalid_argument("kl_divergence: need at least one AC coefficient");
  const double n = static_cast<double>(stats.ac_count());
  const double f = std::max(stats.scale_mle(), kScaleFloor);
  if (reverse) return n * (delta / f + std::log(f / delta) - 1.0);
  return n * (f / delta + std::log(delta / f) - 1.0);
}

Tensor ac_abs_sum(const Tensor& latent) { return sum(mul(abs(latent), ac_mask(latent))); }

Tensor kl_divergence(const Tensor& abs_sum, std::size_t ac_count, double delta, bool reverse) {
  if (ac_count == 0) throw std::invalid_argument("kl_divergence: need at least one AC coefficient");
  const double n = static_cast<double>(ac_count);
  const Tensor f = clamp(mul_scalar(abs_sum, 1.0 / n), kScaleFloor, std::numeric_limits<double>::max());
  const Tensor delta_t = Tensor::full(f.shape(), delta);
  Tensor per_coeff = reverse ? add(div(delta_t, f), log(mul_scalar(f, 1.0 / delta)))
                             : add(mul_scalar(f, 1.0 / delta), neg(log(mul_scalar(f, 1.0 / delta))));
  return mul_scalar(add_scalar(per_coeff, -1.0), n);
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor smoothness_penalty(const Tensor& field) {
  const bool ok = (field.ndim() == 2) || (field.ndim() == 3 && field.dim(0) == 1);
  if (!ok) throw ShapeError("smoothness_penalty: expected [H,W] or [1,H,W], got " + shape_str(field.shape()));
  const std::size_t h = field.dim(field.ndim() - 2), w = field.dim(field.ndim() - 1);
  if (h < 3 || w < 3) throw ShapeError("smoothness_penalty: extents must be at least 3x3");
  const auto f = field.values();
  const double count = static_cast<double>((h - 2) * (w - 2));
  std::vector<double> lap((h - 2) * (w - 2));
  double acc = 0;
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) {
      const double l = f[(i - 1) * w + j] + f[(i + 1) * w + j] + f[i * w + j - 1] + f[i * w + j + 1] - 4 * f[i * w + j];
      lap[(i - 1) * (w - 2) + (j - 1)] = l;
      acc += l * l;
    }
  return detail::finish("smoothness_penalty", {}, {acc / count}, {&field}, [&] {
    return [pf = field.impl(), lap = std::move(lap), h, w, count](std::span<const double> g, const detail::TensorImpl&) {
      double* gf = detail::grad_sink(pf);
      for (std::size_t i = 1; i + 1 < h; ++i)
        for (std::size_t j = 1; j + 1 < w; ++j) {
          const double d = g[0] * 2.0 * lap[(i - 1) * (w - 2) + (j - 1)] / count;
          gf[(i - 1) * w + j] += d;
          gf[(i + 1) * w + j] += d;
          gf[i * w + j - 1] += d;
          gf[i * w + j + 1] += d;
          gf[i * w + j] -= 4 * d;
        }
    };
  });
}

namespace {

Tensor kl_term(const Tensor& latent, const LossConfig& cfg) {
  const auto stats_count = LatentStats::from_latent(latent).ac_count();
  return kl_divergence(ac_abs_sum(latent), stats_count, cfg.delta, cfg.use_reverse_kl());
}

}  // namespace

Tensor elbo_loss(const Tensor& corrected, const Tensor& clean, const Tensor& latent, const LossConfig& cfg) {
  if (corrected.shape() != clean.shape()) {
    throw ShapeError("elbo_loss: corrected " + shape_str(corrected.shape()) + " vs clean " + shape_str(clean.shape()));
  }
  return add(mse(corrected, clean), mul_scalar(kl_term(latent, cfg), cfg.kl_weight));
}

LossTerms total_loss(const Tensor& corrected, const Tensor& clean, const Tensor& latent, const Tensor& field,
                     const LossConfig& cfg) {
  if (corrected.shape() != clean.shape()) {
    throw ShapeError("total_loss: corrected " + shape_str(corrected.shape()) + " vs clean " + shape_str(clean.shape()));
  }
  LossTerms t;
  t.mse = mse(corrected, clean);
  t.kl = kl_term(latent, cfg);
  t.smooth = smoothness_penalty(field);
  t.neg_elbo = add(t.mse, mul_scalar(t.kl, cfg.kl_weight));
  t.total = add(t.neg_elbo, mul_scalar(t.smooth, cfg.smooth_weight));
  return t;
}

}  // namespace vhu
