// Finite-difference helpers shared by the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu::testing {

struct GradReport {
  double max_rel = 0;
  double max_abs = 0;
  std::size_t checked = 0;
};

inline double rel_err(double a, double b, double floor) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor}); }

// Compares backward() against central differences of `loss` for the listed
// leaves. With samples > 0, that many (tensor, index) pairs are drawn at
// random; otherwise every element is checked. With several step sizes an
// entry counts as agreeing at its best step: small steps dodge kinks (relu,
// pooling switches) that a large step straddles, large steps beat roundoff on
// tiny gradients. A wrong analytic gradient disagrees at every step.
inline GradReport grad_check_steps(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                                   const std::vector<double>& steps, std::size_t samples = 0, std::uint64_t seed = 1,
                                   double floor = 1e-6) {
  for (auto& t : leaves) t.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (auto& t : leaves) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  if (samples == 0) {
    for (std::size_t k = 0; k < leaves.size(); ++k)
      for (std::size_t i = 0; i < leaves[k].numel(); ++i) picks.emplace_back(k, i);
  } else {
    std::size_t total = 0;
    for (auto& t : leaves) total += t.numel();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t s = 0; s < samples; ++s) {
      std::size_t flat = pick(rng), k = 0;
      while (flat >= leaves[k].numel()) flat -= leaves[k++].numel();
      picks.emplace_back(k, flat);
    }
  }

  GradReport rep;
  NoGradGuard guard;
  for (auto [k, i] : picks) {
    auto v = leaves[k].mutable_values();
    const double x0 = v[i];
    double best_rel = INFINITY, best_abs = INFINITY;
    for (double h : steps) {
      v[i] = x0 + h;
      const double fp = loss().item();
      v[i] = x0 - h;
      const double fm = loss().item();
      v[i] = x0;
      const double numeric = (fp - fm) / (2 * h);
      best_rel = std::min(best_rel, rel_err(analytic[k][i], numeric, floor));
      best_abs = std::min(best_abs, std::fabs(analytic[k][i] - numeric));
    }
    rep.max_rel = std::max(rep.max_rel, best_rel);
    rep.max_abs = std::max(rep.max_abs, best_abs);
    ++rep.checked;
  }
  return rep;
}

inline GradReport grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> leaves, double h = 1e-5,
                             std::size_t samples = 0, std::uint64_t seed = 1, double floor = 1e-6) {
  return grad_check_steps(loss, std::move(leaves), {h}, samples, seed, floor);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace vhu::testing
