#ifndef LMSTYLE_ADAM_H_
#define LMSTYLE_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "lmstyle/parameters.h"
#include "lmstyle/tensor.h"

namespace lmstyle {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators for one parameter group, aligned by index with the
// parameter list handed to adam_step.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;
  AdamConfig config;

  static AdamState for_params(std::span<Parameter* const> params, const AdamConfig& config);
};

// One bias-corrected Adam update of params using their accumulated grads.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// Global L2 norm of the gradients of params.
double global_grad_norm(std::span<Parameter* const> params);

// Rescales all grads so their global norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace lmstyle

#endif  // LMSTYLE_ADAM_H_
