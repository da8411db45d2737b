#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu {

using NamedTensor = std::pair<std::string, Tensor>;

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. The decay multiplies the parameter by
/// (1 - lr * weight_decay) and never enters the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  // Throws GraphError if a parameter has no gradient, NumericalError if an
  // update would be non-finite (parameters are left untouched in that case).
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWConfig config_;
  std::int64_t step_count_ = 0;
};

}  // namespace vhu
