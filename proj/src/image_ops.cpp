#include <cmath>

#include "autograd.hpp"
#include "gemm.hpp"
#include "vhu/ops.hpp"

namespace vhu {

using detail::finish;
using detail::grad_sink;
using detail::require;

namespace {

void require_chw(const char* op, const Tensor& x) {
  require(x.ndim() == 3, std::string(op) + ": expected [C,H,W], got " + shape_str(x.shape()));
}

struct ConvGeometry {
  std::size_t c, h, w, k, stride, pad, oh, ow;
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return oh * ow; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
  const std::size_t p = g.cols();
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* dst = col + ((c * g.k + ki) * g.k + kj) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            dst[oy * g.ow + ox] = inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, const ConvGeometry& g, double* x) {
  const std::size_t p = g.cols();
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* src = col + ((c * g.k + ki) * g.k + kj) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] += src[oy * g.ow + ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding, const Tensor& bias) {
  require_chw("conv2d", input);
  require(kernel.ndim() == 4, "conv2d: kernel must be [C_out,C_in,k,k], got " + shape_str(kernel.shape()));
  const std::size_t co = kernel.dim(0), k = kernel.dim(2);
  require(kernel.dim(3) == k && k % 2 == 1, "conv2d: kernel must be square with odd extent");
  require(kernel.dim(1) == input.dim(0), "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                                             " input channels, input has " + std::to_string(input.dim(0)));
  require(stride >= 1, "conv2d: stride must be positive");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), k, stride, padding, 0, 0};
  require(g.h + 2 * padding >= k && g.w + 2 * padding >= k, "conv2d: kernel larger than padded input");
  require((g.h + 2 * padding - k) % stride == 0 && (g.w + 2 * padding - k) % stride == 0,
          "conv2d: output extent is not integral for stride " + std::to_string(stride));
  g.oh = (g.h + 2 * padding - k) / stride + 1;
  g.ow = (g.w + 2 * padding - k) / stride + 1;
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == co, "conv2d: bias length must equal output channels");

  std::vector<double> col(g.rows() * g.cols());
  im2col(input.values().data(), g, col.data());
  std::vector<double> out(co * g.cols(), 0.0);
  if (has_bias) {
    const auto b = bias.values();
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t q = 0; q < g.cols(); ++q) out[o * g.cols() + q] = b[o];
  }
  detail::gemm_nn(kernel.values().data(), col.data(), out.data(), co, g.rows(), g.cols());

  std::initializer_list<const Tensor*> inputs = {&input, &kernel, &bias};
  return finish("conv2d", {co, g.oh, g.ow}, std::move(out), inputs, [&] {
    return [pi = input.impl(), pk = kernel.impl(), pb = bias.impl(), col = std::move(col), g, co](
               std::span<const double> gout, const detail::TensorImpl&) {
      const std::size_t rows = g.rows(), cols = g.cols();
      if (double* gk = grad_sink(pk)) detail::gemm_nt(gout.data(), col.data(), gk, co, cols, rows);
      if (pb)
        if (double* gb = grad_sink(pb))
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t q = 0; q < cols; ++q) gb[o] += gout[o * cols + q];
      if (double* gi = grad_sink(pi)) {
        std::vector<double> dcol(rows * cols, 0.0);
        detail::gemm_tn(pk->data.data(), gout.data(), dcol.data(), rows, co, cols);
        col2im_add(dcol.data(), g, gi);
      }
    };
  });
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_chw("instance_norm", x);
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  require(gamma.numel() == c && beta.numel() == c, "instance_norm: affine length must equal channel count");
  const auto xv = x.values(), gm = gamma.values(), bt = beta.values();
  std::vector<double> out(c * n), xhat(c * n), inv_std(c);
  const double nn = static_cast<double>(n);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = xv.data() + ch * n;
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= nn;
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= nn;
    inv_std[ch] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[ch * n + j] = (row[j] - mu) * inv_std[ch];
      out[ch * n + j] = gm[ch] * xhat[ch * n + j] + bt[ch];
    }
  }
  return finish("instance_norm", x.shape(), std::move(out), {&x, &gamma, &beta}, [&] {
    return [px = x.impl(), pg = gamma.impl(), pb = beta.impl(), xhat = std::move(xhat), inv_std = std::move(inv_std), c,
            n](std::span<const double> g, const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      double* gg = grad_sink(pg);
      double* gb = grad_sink(pb);
      const double nn = static_cast<double>(n);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double gmv = pg->data[ch];
        double s1 = 0, s2 = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g[ch * n + j];
          s1 += gv;
          s2 += gv * xhat[ch * n + j];
        }
        if (gg) gg[ch] += s2;
        if (gb) gb[ch] += s1;
        if (gx) {
          const double scale = gmv * inv_std[ch] / nn;
          for (std::size_t j = 0; j < n; ++j)
            gx[ch * n + j] += scale * (nn * g[ch * n + j] - s1 - xhat[ch * n + j] * s2);
        }
      }
    };
  });
}

Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_chw("channel_affine", x);
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  require(gamma.numel() == c && beta.numel() == c,
          "channel_affine: expected " + std::to_string(c) + " scale/bias entries, got " +
              std::to_string(gamma.numel()) + "/" + std::to_string(beta.numel()));
  const auto xv = x.values(), gm = gamma.values(), bt = beta.values();
  std::vector<double> out(c * n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < n; ++j) out[ch * n + j] = gm[ch] * xv[ch * n + j] + bt[ch];
  return finish("channel_affine", x.shape(), std::move(out), {&x, &gamma, &beta}, [&] {
    return [px = x.impl(), pg = gamma.impl(), pb = beta.impl(), c, n](std::span<const double> g,
                                                                      const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      double* gg = grad_sink(pg);
      double* gb = grad_sink(pb);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g[ch * n + j];
          if (gx) gx[ch * n + j] += gv * pg->data[ch];
          if (gg) gg[ch] += gv * px->data[ch * n + j];
          if (gb) gb[ch] += gv;
        }
    };
  });
}

Tensor spatial_mul(const Tensor& x, const Tensor& w) {
  require_chw("spatial_mul", x);
  require(w.ndim() == 2 && w.dim(0) == x.dim(1) && w.dim(1) == x.dim(2),
          "spatial_mul: weights " + shape_str(w.shape()) + " do not match spatial extents of " + shape_str(x.shape()));
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  const auto xv = x.values(), wv = w.values();
  std::vector<double> out(c * n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < n; ++j) out[ch * n + j] = xv[ch * n + j] * wv[j];
  return finish("spatial_mul", x.shape(), std::move(out), {&x, &w}, [&] {
    return [px = x.impl(), pw = w.impl(), c, n](std::span<const double> g, const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      double* gw = grad_sink(pw);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t j = 0; j < n; ++j) {
          if (gx) gx[ch * n + j] += g[ch * n + j] * pw->data[j];
          if (gw) gw[j] += g[ch * n + j] * px->data[ch * n + j];
        }
    };
  });
}

Tensor max_pool2x2(const Tensor& x) {
  require_chw("max_pool2x2", x);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(h % 2 == 0 && w % 2 == 0, "max_pool2x2: extents must be even, got " + shape_str(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  const auto xv = x.values();
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (ch * h + 2 * i) * w + 2 * j;
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t idx = (ch * h + 2 * i + a) * w + 2 * j + b;
            if (xv[idx] > xv[best]) best = idx;
          }
        const std::size_t o = (ch * oh + i) * ow + j;
        out[o] = xv[best];
        arg[o] = best;
      }
  return finish("max_pool2x2", {c, oh, ow}, std::move(out), {&x}, [&] {
    return [px = x.impl(), arg = std::move(arg)](std::span<const double> g, const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      for (std::size_t o = 0; o < g.size(); ++o) gx[arg[o]] += g[o];
    };
  });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_chw("upsample_nearest2x", x);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  const auto xv = x.values();
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) out[(ch * oh + i) * ow + j] = xv[(ch * h + i / 2) * w + j / 2];
  return finish("upsample_nearest2x", {c, oh, ow}, std::move(out), {&x}, [&] {
    return [px = x.impl(), c, h, w](std::span<const double> g, const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      const std::size_t oh = 2 * h, ow = 2 * w;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) gx[(ch * h + i / 2) * w + j / 2] += g[(ch * oh + i) * ow + j];
    };
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_chw("concat_channels", a);
  require_chw("concat_channels", b);
  require(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial extents differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.numel();
  return finish("concat_channels", {a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl(), na](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
    };
  });
}

}  // namespace vhu
