#include "vhu/hadamard.hpp"

#include <cmath>

#include "autograd.hpp"
#include "vhu/ops.hpp"

namespace vhu {

using detail::finish;
using detail::grad_sink;

std::vector<double> hadamard_matrix(std::size_t n) {
  if (!is_power_of_two(n)) throw ShapeError("hadamard_matrix: order " + std::to_string(n) + " is not a power of two");
  std::vector<double> h{1.0};
  for (std::size_t m = 1; m < n; m *= 2) {
    std::vector<double> next(4 * m * m);
    const std::size_t w = 2 * m;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double v = h[i * m + j];
        next[i * w + j] = v;
        next[i * w + j + m] = v;
        next[(i + m) * w + j] = v;
        next[(i + m) * w + j + m] = -v;
      }
    h = std::move(next);
  }
  return h;
}

void fwht(std::span<double> v) {
  const std::size_t n = v.size();
  if (!is_power_of_two(n)) throw ShapeError("fwht: length " + std::to_string(n) + " is not a power of two");
  for (std::size_t h = 1; h < n; h *= 2)
    for (std::size_t i = 0; i < n; i += 2 * h)
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j], b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
}

HadamardPlan::HadamardPlan(std::size_t height, std::size_t width)
    : height_(height), width_(width), inverse_scale_(1.0 / static_cast<double>(height * width)) {
  if (!is_power_of_two(height) || !is_power_of_two(width)) {
    throw ShapeError("Hadamard transform needs power-of-two extents, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

HadamardPlan HadamardPlan::for_tensor(const Tensor& x) {
  if (x.ndim() != 2 && x.ndim() != 3) throw ShapeError("Hadamard transform expects [C,H,W] or [H,W], got " + shape_str(x.shape()));
  return {x.dim(x.ndim() - 2), x.dim(x.ndim() - 1)};
}

void HadamardPlan::forward_plane(double* plane) const {
  for (std::size_t r = 0; r < height_; ++r) fwht({plane + r * width_, width_});
  // Column butterflies run over whole rows so the inner loop is contiguous.
  for (std::size_t h = 1; h < height_; h *= 2)
    for (std::size_t i = 0; i < height_; i += 2 * h)
      for (std::size_t r = i; r < i + h; ++r) {
        double* a = plane + r * width_;
        double* b = plane + (r + h) * width_;
        for (std::size_t c = 0; c < width_; ++c) {
          const double x = a[c], y = b[c];
          a[c] = x + y;
          b[c] = x - y;
        }
      }
}

namespace {

void check_plan(const Tensor& x, const HadamardPlan& plan, const char* op) {
  detail::require(x.ndim() == 2 || x.ndim() == 3, std::string(op) + ": expected [C,H,W], got " + shape_str(x.shape()));
  detail::require(x.dim(x.ndim() - 2) == plan.height() && x.dim(x.ndim() - 1) == plan.width(),
                  std::string(op) + ": extents of " + shape_str(x.shape()) + " do not match the plan");
}

std::vector<double> transform_planes(std::span<const double> in, const HadamardPlan& plan, double scale) {
  std::vector<double> out(in.begin(), in.end());
  const std::size_t plane = plan.height() * plan.width();
  for (std::size_t off = 0; off < out.size(); off += plane) plan.forward_plane(out.data() + off);
  if (scale != 1.0)
    for (auto& v : out) v *= scale;
  return out;
}

// H is symmetric, so the adjoint of a (scaled) 2-D transform is the same transform.
Tensor planar_transform(const char* op, const Tensor& x, const HadamardPlan& plan, double scale) {
  check_plan(x, plan, op);
  auto out = transform_planes(x.values(), plan, scale);
  return finish(op, x.shape(), std::move(out), {&x}, [&] {
    return [px = x.impl(), plan, scale](std::span<const double> g, const detail::TensorImpl&) {
      const auto back = transform_planes(g, plan, scale);
      double* gx = grad_sink(px);
      for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
    };
  });
}

// Index of the threshold entry matching flat element i of X.
struct Broadcast {
  std::size_t period;
  std::size_t operator()(std::size_t i) const { return i % period; }
};

Broadcast threshold_layout(const char* op, const Tensor& x, const Tensor& t) {
  if (t.shape() == x.shape()) return {x.numel()};
  const bool trailing = t.ndim() == 2 && x.ndim() >= 2 && t.dim(0) == x.dim(x.ndim() - 2) && t.dim(1) == x.dim(x.ndim() - 1);
  detail::require(trailing, std::string(op) + ": threshold " + shape_str(t.shape()) + " does not broadcast to " +
                                shape_str(x.shape()));
  return {t.numel()};
}

}  // namespace

Tensor ht2d(const Tensor& x, const HadamardPlan& plan) { return planar_transform("ht2d", x, plan, 1.0); }
Tensor ht2d(const Tensor& x) { return ht2d(x, HadamardPlan::for_tensor(x)); }
Tensor iht2d(const Tensor& y, const HadamardPlan& plan) {
  return planar_transform("iht2d", y, plan, plan.inverse_scale());
}
Tensor iht2d(const Tensor& y) { return iht2d(y, HadamardPlan::for_tensor(y)); }

ScalingParams ScalingParams::identity(std::size_t height, std::size_t width) {
  return {Tensor::full({height, width}, 1.0, true)};
}

ThresholdParams ThresholdParams::zero(std::size_t height, std::size_t width) {
  return {Tensor::zeros({height, width}, true)};
}

Tensor ThresholdParams::effective() const { return threshold_from_raw(t_raw); }

Tensor scale(const Tensor& x, const ScalingParams& params) { return spatial_mul(x, params.theta); }

Tensor threshold_from_raw(const Tensor& t_raw) {
  const auto v = t_raw.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? v[i] : 0.0;
  return finish("threshold_from_raw", t_raw.shape(), std::move(out), {&t_raw}, [&] {
    return [pt = t_raw.impl()](std::span<const double> g, const detail::TensorImpl&) {
      double* gt = grad_sink(pt);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (pt->data[i] >= 0) gt[i] += g[i];
    };
  });
}

double semi_soft_value(double x, double t) {
  const double ax = std::fabs(x);
  if (!(ax > t)) return 0.0;
  const double s = x > 0 ? 1.0 : -1.0;
  return s * (ax - t * std::exp(t - ax));
}

Tensor gate(const Tensor& x, const Tensor& t) {
  const auto idx = threshold_layout("gate", x, t);
  const auto xv = x.values(), tv = t.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::fabs(xv[i]) - tv[idx(i)] > 0 ? 1.0 : 0.0;
  detail::check_finite("gate", out);
  return Tensor(x.shape(), std::move(out));
}

Tensor semi_soft(const Tensor& x, const Tensor& t) {
  const auto idx = threshold_layout("semi_soft", x, t);
  const auto xv = x.values(), tv = t.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = semi_soft_value(xv[i], tv[idx(i)]);
  return finish("semi_soft", x.shape(), std::move(out), {&x, &t}, [&] {
    return [px = x.impl(), pt = t.impl(), idx](std::span<const double> g, const detail::TensorImpl&) {
      double* gx = grad_sink(px);
      double* gt = grad_sink(pt);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double xi = px->data[i], ti = pt->data[idx(i)], ax = std::fabs(xi);
        if (!(ax > ti)) continue;
        const double decay = std::exp(ti - ax);
        if (gx) gx[i] += g[i] * (1.0 + ti * decay);
        if (gt) gt[idx(i)] -= g[i] * (xi > 0 ? 1.0 : -1.0) * (1.0 + ti) * decay;
      }
    };
  });
}

}  // namespace vhu
