#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "unimts/diff/tape.hpp"
#include "unimts/diff/tensor.hpp"

namespace unimts::diff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients against central differences
/// (f(θ+eps) − f(θ−eps)) / (2 eps), coordinate by coordinate. The relative
/// error of a coordinate is |a − b| / max(|a|, |b|, 1e-8).
///
/// `fn` must build a deterministic scalar on the supplied tape.
template <class Real>
GradCheckResult grad_check_detailed(const std::function<Var<Real>(Tape<Real>&)>& fn,
                                    std::span<Parameter<Real>* const> params, double eps = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Real> tape;
    tape.backward(fn(tape));
  }
  auto evaluate = [&] {
    Tape<Real> tape;
    return static_cast<double>(fn(tape).value()[0]);
  };

  GradCheckResult result;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Real saved = p->value[i];
      p->value[i] = static_cast<Real>(saved + eps);
      const double up = evaluate();
      p->value[i] = static_cast<Real>(saved - eps);
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = static_cast<double>(p->grad[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      const double err = std::abs(numeric - analytic) / denom;
      if (err > result.max_rel_error) result = {err, p->name, i, analytic, numeric};
    }
  }
  return result;
}

template <class Real>
double grad_check(const std::function<Var<Real>(Tape<Real>&)>& fn,
                  std::span<Parameter<Real>* const> params, double eps = 1e-5) {
  return grad_check_detailed(fn, params, eps).max_rel_error;
}

}  // namespace unimts::diff
