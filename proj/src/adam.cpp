#include "pdrfe/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace pdrfe {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
  }
  if (first_moment_.empty()) {
    for (const Tensor* p : params) {
      first_moment_.push_back(Tensor::zeros(p->shape()));
      second_moment_.push_back(Tensor::zeros(p->shape()));
    }
  } else if (first_moment_.size() != params.size()) {
    throw std::invalid_argument("Adam::step: parameter set changed between steps");
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) {
      throw ShapeError("Adam::step: gradient shape " + shape_to_string(g.shape()) +
                       " for parameter " + shape_to_string(p.shape()));
    }
    Tensor& m = first_moment_[k];
    Tensor& v = second_moment_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / correction1;
      const double vhat = v[i] / correction2;
      p[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace pdrfe
