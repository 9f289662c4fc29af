#include "pdrfe/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pdrfe {

namespace {

double evaluate(const ScalarProgram& f, const std::vector<Tensor>& params, std::size_t probe) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.constant(p));
  double value = 0.0;
  try {
    value = f(tape, vars).value().item();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("grad_check: f not finite when probing parameter " +
                         std::to_string(probe) + " (" + e.what() + ")");
  }
  if (!std::isfinite(value)) {
    throw NonFiniteError("grad_check: f not finite when probing parameter " +
                         std::to_string(probe));
  }
  return value;
}

}  // namespace

GradCheckResult grad_check(const ScalarProgram& f, std::vector<Tensor> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<Tensor> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    ad::Var out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + eps;
      const double up = evaluate(f, params, p);
      params[p][i] = saved - eps;
      const double down = evaluate(f, params, p);
      params[p][i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error || (p == 0 && i == 0)) {
        result = {rel, p, i, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace pdrfe
