#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pdrfe/autodiff.hpp"

namespace pdrfe {

// Builds a scalar on `tape` from the parameters bound there (same order as given).
using ScalarProgram =
    std::function<ad::Var(ad::Tape& tape, std::span<const ad::Var> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares tape gradients with central differences (f(θ+ε) − f(θ−ε)) / 2ε for
/// every entry of every parameter. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Throws NonFiniteError naming the parameter
/// when f is not finite at a probe.
GradCheckResult grad_check(const ScalarProgram& f, std::vector<Tensor> params,
                           double eps = 1e-5);

}  // namespace pdrfe
