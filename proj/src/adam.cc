#include "lmstyle/adam.h"

#include <cmath>

#include "lmstyle/errors.h"

namespace lmstyle {

AdamState AdamState::for_params(std::span<Parameter* const> params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const Parameter* p : params) {
    s.m.emplace_back(p->value.shape(), 0.0);
    s.v.emplace_back(p->value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  LMS_REQUIRE(params.size() == state.m.size() && params.size() == state.v.size(),
              "optimizer state does not match parameter list");
  for (size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    LMS_REQUIRE(p.grad.same_shape(p.value) && state.m[k].same_shape(p.value) &&
                    state.v[k].same_shape(p.value),
                "shape mismatch for " + p.name);
  }
  const AdamConfig& c = state.config;
  state.t += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p.value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.values()) g *= s;
  }
  return norm;
}

}  // namespace lmstyle
