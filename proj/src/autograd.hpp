// Internal tape machinery shared by the op implementations.
#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu::detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool recorded = false;
};

using ImplPtr = std::shared_ptr<TensorImpl>;
// Adjoint rule: receives the output's accumulated gradient and the output node.
using BackwardFn = std::function<void(std::span<const double>, const TensorImpl&)>;

// Gradient buffer of an input that takes part in differentiation, allocated on
// first use; nullptr when the input does not require a gradient.
inline double* grad_sink(const ImplPtr& impl) {
  if (!impl->requires_grad) return nullptr;
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad.data();
}

void push_tape(ImplPtr out, BackwardFn fn);

void check_finite(const char* op, std::span<const double> values);

// Wraps a freshly computed buffer as an op output. When any input requires a
// gradient and recording is on, the output joins the tape with `make_backward()`
// as its adjoint rule. The factory is only invoked when recording.
template <class MakeBackward>
Tensor finish(const char* op, Shape shape, std::vector<double> data,
              std::initializer_list<const Tensor*> inputs, MakeBackward&& make_backward) {
  check_finite(op, data);
  Tensor out(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  if (!needs) return out;
  out.impl()->requires_grad = true;
  out.impl()->recorded = true;
  push_tape(out.impl(), make_backward());
  return out;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace vhu::detail
