#ifndef LMSTYLE_GRADCHECK_H_
#define LMSTYLE_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lmstyle/graph.h"
#include "lmstyle/parameters.h"

namespace lmstyle {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  int64_t coordinates = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-6;
  // Use the five-point central stencil instead of the two-point one.
  bool five_point = false;
  // Five-point step for the GRU and whole-model checks, whose losses sum
  // many terms and lose precision at small steps.
  double model_step = 1e-4;
  double tolerance = 1e-4;
  // Entries checked per parameter; larger tensors are subsampled.
  int max_coords_per_param = 24;
  // Gradients smaller than this in both estimates are compared absolutely.
  double abs_floor = 1e-7;
};

// Compares backward() against central differences of loss(graph) with
// respect to every parameter in params.
GradCheckResult check_gradients(const std::string& name, ParameterSet& params,
                                const std::function<Var(Graph&)>& loss, const GradCheckOptions& options = {},
                                uint64_t seed = 0);

// Every op, the GRU step, and the encoder -> relaxed decoder -> LM scoring
// pipeline on small random instances.
std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& options = {}, uint64_t seed = 7);

}  // namespace lmstyle

#endif  // LMSTYLE_GRADCHECK_H_
