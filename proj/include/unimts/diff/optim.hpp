#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"

namespace unimts::diff {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update at step t (1-based). Moments live on each
/// Parameter; frozen parameters are skipped.
template <class Real>
void adam_step(std::span<Parameter<Real>* const> params, const AdamOptions& opt, std::size_t t) {
  if (t < 1) throw Error(ErrorKind::BadConfig, "Adam step counter starts at 1");
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (Parameter<Real>* p : params) {
    if (!p->trainable) continue;
    auto w = p->value.values();
    auto g = p->grad.values();
    auto m = p->first_moment.values();
    auto v = p->second_moment.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = opt.beta1 * static_cast<double>(m[i]) + (1.0 - opt.beta1) * gi;
      const double vi = opt.beta2 * static_cast<double>(v[i]) + (1.0 - opt.beta2) * gi * gi;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double m_hat = mi / c1;
      const double v_hat = vi / c2;
      w[i] = static_cast<Real>(static_cast<double>(w[i]) - opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps));
    }
  }
}

/// Adam with its own step counter.
template <class Real>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Parameter<Real>* const> params) { adam_step(params, options_, ++t_); }

  std::size_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
};

}  // namespace unimts::diff
