#include "lmstyle/gumbel.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "lmstyle/errors.h"
#include "lmstyle/parameters.h"

namespace lmstyle {

Tensor sample_gumbel(const Shape& shape, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor out(shape);
  for (double& v : out.values()) {
    const double u = std::clamp(uniform01(rng), kUniformClamp, 1.0 - kUniformClamp);
    v = -std::log(-std::log(u));
  }
  return out;
}

Var gumbel_softmax(Graph& g, Var logits, double tau, const Tensor& noise) {
  LMS_REQUIRE(tau > 0.0, "temperature must be positive");
  const Tensor& l = logits.value();
  LMS_REQUIRE(noise.rows() == l.rows() && noise.cols() == l.cols(), "noise shape differs from logits");
  Var log_pi = g.log_softmax(logits);
  Var perturbed = g.add(log_pi, g.constant(noise));
  return g.softmax(g.scale(perturbed, 1.0 / tau));
}

void AnnealSchedule::validate() const {
  LMS_REQUIRE(floor > 0.0 && initial > floor, "need initial > floor > 0");
  LMS_REQUIRE(decay > 0.0 && decay < 1.0, "decay must lie in (0, 1)");
}

double anneal(int epoch, const AnnealSchedule& schedule) {
  LMS_REQUIRE(epoch >= 0, "epoch must be non-negative");
  schedule.validate();
  return std::max(schedule.floor, schedule.initial * std::pow(schedule.decay, epoch));
}

}  // namespace lmstyle
