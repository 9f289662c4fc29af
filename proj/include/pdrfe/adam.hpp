#pragma once

#include <cstddef>
#include <vector>

#include "pdrfe/tensor.hpp"

namespace pdrfe {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step and keyed
/// by position, so callers must pass parameters in a stable order.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

  std::size_t steps_taken() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

}  // namespace pdrfe
