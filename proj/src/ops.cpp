#include "vhu/ops.hpp"

#include <algorithm>
#include <cmath>

#include "autograd.hpp"
#include "gemm.hpp"

namespace vhu {

using detail::finish;
using detail::grad_sink;
using detail::ImplPtr;
using detail::require;

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined operand");
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_matrix(const char* op, const Tensor& a) {
  require(a.ndim() == 2, std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

// Elementwise unary op with value f(x) and derivative df(x).
template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
  const auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return finish(op, a.shape(), std::move(out), {&a}, [&] {
    ImplPtr pa = a.impl();
    return [pa, df](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      const auto& xs = pa->data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xs[i]);
    };
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return finish("add", a.shape(), std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl()](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return finish("sub", a.shape(), std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl()](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return finish("mul", a.shape(), std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl()](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb->data[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa->data[i];
    };
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  return finish("div", a.shape(), std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl()](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / pb->data[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double d = pb->data[i];
          gb[i] -= g[i] * pa->data[i] / (d * d);
        }
    };
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary("mul_scalar", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x) { return x > 0 ? 1.0 : slope; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double v : a.values()) s += v;
  return finish("sum", {}, {s}, {&a}, [&] {
    return [pa = a.impl()](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      for (std::size_t i = 0; i < pa->data.size(); ++i) ga[i] += g[0];
    };
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean: empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return finish("reshape", std::move(shape), std::move(out), {&a}, [&] {
    return [pa = a.impl()](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  });
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t length) {
  require(offset + length <= a.numel(), "slice: window exceeds " + shape_str(a.shape()));
  const auto x = a.values();
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(offset),
                          x.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return finish("slice", {length}, std::move(out), {&a}, [&] {
    return [pa = a.impl(), offset](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
    };
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto x = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return finish("transpose", {n, m}, std::move(out), {&a}, [&] {
    return [pa = a.impl(), m, n](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    };
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return finish("matmul", {m, n}, std::move(out), {&a, &b}, [&] {
    return [pa = a.impl(), pb = b.impl(), m, k, n](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa)) detail::gemm_nt(g.data(), pb->data.data(), ga, m, n, k);
      if (double* gb = grad_sink(pb)) detail::gemm_tn(pa->data.data(), g.data(), gb, k, m, n);
    };
  });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  require_matrix("add_row_bias", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  require(bias.numel() == n, "add_row_bias: bias length " + std::to_string(bias.numel()) + " for " + shape_str(a.shape()));
  const auto x = a.values(), bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bv[j];
  return finish("add_row_bias", a.shape(), std::move(out), {&a, &bias}, [&] {
    return [pa = a.impl(), pb = bias.impl(), m, n](std::span<const double> g, const detail::TensorImpl&) {
      if (double* ga = grad_sink(pa))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (double* gb = grad_sink(pb))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    };
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t m = parts[0].ndim() == 2 ? parts[0].dim(0) : 0;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    require(p.dim(0) == m, "concat_cols: row count mismatch");
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t n = p.dim(1);
    const auto x = p.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * total + col + j] = x[i * n + j];
    col += n;
  }
  // finish() takes an initializer_list, so gradients are gated per part below.
  detail::check_finite("concat_cols", out);
  Tensor result({m, total}, std::move(out));
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (!grad_enabled() || !needs) return result;
  result.impl()->requires_grad = true;
  result.impl()->recorded = true;
  std::vector<ImplPtr> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  detail::push_tape(result.impl(), [impls, m, total](std::span<const double> g, const detail::TensorImpl&) {
    std::size_t c = 0;
    for (const auto& pi : impls) {
      const std::size_t n = pi->shape[1];
      if (double* gp = grad_sink(pi))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gp[i * n + j] += g[i * total + c + j];
      c += n;
    }
  });
  return result;
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix("softmax_rows", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto x = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0;
    for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return finish("softmax_rows", a.shape(), std::move(out), {&a}, [&] {
    return [pa = a.impl(), m, n](std::span<const double> g, const detail::TensorImpl& o) {
      double* ga = grad_sink(pa);
      const auto& y = o.data;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - s);
      }
    };
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix("layer_norm_rows", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  require(gamma.numel() == n && beta.numel() == n, "layer_norm_rows: affine length must equal " + std::to_string(n));
  const auto x = a.values(), gm = gamma.values(), bt = beta.values();
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = gm[j] * xhat[i * n + j] + bt[j];
    }
  }
  return finish("layer_norm_rows", a.shape(), std::move(out), {&a, &gamma, &beta}, [&] {
    return [pa = a.impl(), pg = gamma.impl(), pb = beta.impl(), xhat = std::move(xhat), inv_std = std::move(inv_std), m,
            n](std::span<const double> g, const detail::TensorImpl&) {
      double* ga = grad_sink(pa);
      double* gg = grad_sink(pg);
      double* gb = grad_sink(pb);
      const auto& gm = pg->data;
      const double nn = static_cast<double>(n);
      for (std::size_t i = 0; i < m; ++i) {
        double s1 = 0, s2 = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = g[i * n + j] * gm[j];
          s1 += dxh;
          s2 += dxh * xhat[i * n + j];
          if (gg) gg[j] += g[i * n + j] * xhat[i * n + j];
          if (gb) gb[j] += g[i * n + j];
        }
        if (ga)
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = g[i * n + j] * gm[j];
            ga[i * n + j] += inv_std[i] / nn * (nn * dxh - s1 - xhat[i * n + j] * s2);
          }
      }
    };
  });
}

}  // namespace vhu
