#include "vhu/optim.hpp"

#include <cmath>

namespace vhu {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0)) throw std::invalid_argument("AdamW: learning rate must be positive");
  if (!(config_.beta1 > 0 && config_.beta1 < 1 && config_.beta2 > 0 && config_.beta2 < 1))
    throw std::invalid_argument("AdamW: betas must lie in (0,1)");
  if (config_.weight_decay < 0) throw std::invalid_argument("AdamW: weight decay must be nonnegative");
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() {
  for (std::size_t k = 0; k < params_.size(); ++k)
    if (!params_[k].has_grad()) throw GraphError("AdamW: parameter " + std::to_string(k) + " has no gradient");

  const std::int64_t t = step_count_ + 1;
  const double b1 = config_.beta1, b2 = config_.beta2, lr = config_.learning_rate;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double decay = 1.0 - lr * config_.weight_decay;

  // Stage everything first so a non-finite update leaves the state untouched.
  std::vector<std::vector<double>> m_next(params_.size()), v_next(params_.size()), p_next(params_.size());
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto g = params_[k].grad();
    const auto p = params_[k].values();
    m_next[k].resize(p.size());
    v_next[k].resize(p.size());
    p_next[k].resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double m = b1 * m_[k][i] + (1 - b1) * g[i];
      const double v = b2 * v_[k][i] + (1 - b2) * g[i] * g[i];
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + config_.eps);
      const double np = p[i] * decay - update;
      if (!std::isfinite(np)) {
        throw NumericalError("AdamW: non-finite update for parameter " + std::to_string(k) + " at index " +
                             std::to_string(i));
      }
      m_next[k][i] = m;
      v_next[k][i] = v;
      p_next[k][i] = np;
    }
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    m_[k] = std::move(m_next[k]);
    v_[k] = std::move(v_next[k]);
    auto dst = params_[k].mutable_values();
    std::copy(p_next[k].begin(), p_next[k].end(), dst.begin());
  }
  step_count_ = t;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace vhu
