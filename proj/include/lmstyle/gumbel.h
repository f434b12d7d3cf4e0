#ifndef LMSTYLE_GUMBEL_H_
#define LMSTYLE_GUMBEL_H_

#include <cstdint>

#include "lmstyle/graph.h"
#include "lmstyle/tensor.h"

namespace lmstyle {

// Uniform draws are clamped to this distance from {0, 1} before the
// double-log transform, so every Gumbel sample is finite.
inline constexpr double kUniformClamp = 1e-12;

// i.i.d. Gumbel(0, 1) noise, g = -log(-log(u)), reproducible from seed.
Tensor sample_gumbel(const Shape& shape, uint64_t seed);

// Row-wise relaxed categorical sample:
//   p_i = exp((log pi_i + g_i) / tau) / sum_j exp((log pi_j + g_j) / tau)
// with log pi = log_softmax(logits). Differentiable in logits.
Var gumbel_softmax(Graph& g, Var logits, double tau, const Tensor& noise);

struct AnnealSchedule {
  double initial = 1.0;
  double decay = 0.5;
  double floor = 0.001;

  void validate() const;
};

// max(floor, initial * decay^epoch).
double anneal(int epoch, const AnnealSchedule& schedule);

}  // namespace lmstyle

#endif  // LMSTYLE_GUMBEL_H_
