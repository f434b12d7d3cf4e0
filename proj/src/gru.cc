#include "lmstyle/gru.h"

#include "lmstyle/errors.h"

namespace lmstyle {

GruParams GruParams::create(ParameterSet& params, const std::string& prefix, int input_size,
                            int hidden_size, std::mt19937_64& rng) {
  LMS_REQUIRE(input_size > 0 && hidden_size > 0, "GRU sizes must be positive");
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w = &params.add_uniform(prefix + "w", {input_size, 3 * hidden_size}, kInitScale, rng);
  p.u_gates = &params.add_uniform(prefix + "u_gates", {hidden_size, 2 * hidden_size}, kInitScale, rng);
  p.u_cand = &params.add_uniform(prefix + "u_cand", {hidden_size, hidden_size}, kInitScale, rng);
  p.b = &params.add_zeros(prefix + "b", {1, 3 * hidden_size});
  return p;
}

GruVars bind(Graph& g, const GruParams& p, bool trainable) {
  return GruVars{g.param(*p.w, trainable), g.param(*p.u_gates, trainable), g.param(*p.u_cand, trainable),
                 g.param(*p.b, trainable), p.input_size, p.hidden_size};
}

Var gru_step(Graph& g, Var x, Var h_prev, const GruVars& p) {
  const int h = p.hidden_size;
  LMS_REQUIRE(x.value().cols() == p.input_size, "GRU input has " + std::to_string(x.value().cols()) +
                                                    " columns, expected " + std::to_string(p.input_size));
  LMS_REQUIRE(h_prev.value().cols() == h && h_prev.value().rows() == x.value().rows(),
              "GRU hidden state shape mismatch");
  Var xw = g.add(g.matmul(x, p.w), p.b);
  Var gates = g.sigmoid(g.add(g.slice_cols(xw, 0, 2 * h), g.matmul(h_prev, p.u_gates)));
  Var update = g.slice_cols(gates, 0, h);
  Var reset = g.slice_cols(gates, h, 2 * h);
  Var cand = g.tanh(g.add(g.slice_cols(xw, 2 * h, 3 * h), g.matmul(g.mul(reset, h_prev), p.u_cand)));
  return g.add(h_prev, g.mul(update, g.sub(cand, h_prev)));
}

}  // namespace lmstyle
