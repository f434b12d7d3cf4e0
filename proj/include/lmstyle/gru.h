#ifndef LMSTYLE_GRU_H_
#define LMSTYLE_GRU_H_

#include <random>
#include <string>

#include "lmstyle/graph.h"
#include "lmstyle/parameters.h"

namespace lmstyle {

// Initialization range for weight matrices; biases start at zero.
inline constexpr double kInitScale = 0.08;

// Single-layer GRU. Column blocks of w, b are [update | reset | candidate];
// u_gates holds [update | reset] recurrent weights.
struct GruParams {
  Parameter* w = nullptr;        // d_in x 3h
  Parameter* u_gates = nullptr;  // h x 2h
  Parameter* u_cand = nullptr;   // h x h
  Parameter* b = nullptr;        // 1 x 3h
  int input_size = 0;
  int hidden_size = 0;

  static GruParams create(ParameterSet& params, const std::string& prefix, int input_size,
                          int hidden_size, std::mt19937_64& rng);
};

struct GruVars {
  Var w, u_gates, u_cand, b;
  int input_size = 0;
  int hidden_size = 0;
};

GruVars bind(Graph& g, const GruParams& p, bool trainable);

// u = sigmoid(W_u x + U_u h + b_u), r = sigmoid(W_r x + U_r h + b_r),
// c = tanh(W_c x + U_c (r * h) + b_c), result (1 - u) * h + u * c.
// x is (batch x d_in), h is (batch x hidden).
Var gru_step(Graph& g, Var x, Var h_prev, const GruVars& p);

}  // namespace lmstyle

#endif  // LMSTYLE_GRU_H_
