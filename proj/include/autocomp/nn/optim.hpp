#pragma once

#include <cmath>
#include <span>

#include "autocomp/error.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp::nn {

struct AdamConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected ADAM update of `param` with gradient `grad`.
template <class T>
void adam_update(Parameter<T>& param, std::span<const T> grad, const AdamConfig& cfg) {
  auto value = param.value.data();
  if (grad.size() != value.size())
    throw DataError("adam: gradient length mismatch for parameter " + param.name);
  ++param.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(param.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(param.step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    const double m = cfg.beta1 * param.first_moment[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * param.second_moment[i] + (1.0 - cfg.beta2) * g * g;
    param.first_moment[i] = static_cast<T>(m);
    param.second_moment[i] = static_cast<T>(v);
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    value[i] = static_cast<T>(value[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

// Updates every parameter from its accumulated gradient, then clears it.
// Parameters that received no gradient still advance their moments with g = 0.
template <class T>
void adam_step(std::span<Parameter<T>* const> params, const AdamConfig& cfg) {
  for (Parameter<T>* p : params) {
    if (p->value.grad().empty()) {
      std::vector<T> zeros(p->value.numel(), T(0));
      adam_update<T>(*p, zeros, cfg);
    } else {
      std::span<const T> g = p->value.grad();
      adam_update<T>(*p, g, cfg);
    }
    p->value.zero_grad();
  }
}

}  // namespace autocomp::nn
