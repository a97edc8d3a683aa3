#include "clarigen/seq2seq/lstm.h"

#include <algorithm>

namespace clarigen::seq2seq {

LstmLayer add_lstm_layer(ParameterSet& params, const std::string& prefix, std::size_t input,
                         std::size_t hidden, numerics::Rng& rng) {
  LstmLayer layer;
  layer.input = input;
  layer.hidden = hidden;
  layer.w = params.add_uniform(prefix + ".w", {input + hidden, 4 * hidden}, rng, 0.1);
  layer.b = params.add_zeros(prefix + ".b", {1, 4 * hidden});
  return layer;
}

LstmState zero_state(Graph& g, std::size_t batch, std::size_t hidden) {
  return {g.input(numerics::Tensor({batch, hidden})), g.input(numerics::Tensor({batch, hidden}))};
}

LstmState lstm_step(Graph& g, ParameterSet& params, const LstmLayer& layer, Expr x,
                    const LstmState& prev) {
  const std::size_t h = layer.hidden;
  const Expr parts[] = {x, prev.h};
  Expr z = add_bias(matmul(concat_cols(parts), g.param(params[layer.w])), g.param(params[layer.b]));
  Expr i = sigmoid(slice_cols(z, 0, h));
  Expr f = sigmoid(slice_cols(z, h, 2 * h));
  Expr cand = tanh(slice_cols(z, 2 * h, 3 * h));
  Expr o = sigmoid(slice_cols(z, 3 * h, 4 * h));
  Expr c = add(mul(f, prev.c), mul(i, cand));
  return {mul(o, tanh(c)), c};
}

Expr lstm_stack_step(Graph& g, ParameterSet& params, const std::vector<LstmLayer>& layers,
                     Expr x, std::vector<LstmState>& states, const std::vector<bool>& active,
                     double dropout, bool train, numerics::Rng& rng) {
  const bool all_active = std::all_of(active.begin(), active.end(), [](bool b) { return b; });
  Expr input = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LstmState next = lstm_step(g, params, layers[l], input, states[l]);
    if (!all_active) {
      next.h = select_rows(active, next.h, states[l].h);
      next.c = select_rows(active, next.c, states[l].c);
    }
    states[l] = next;
    input = l + 1 < layers.size() ? numerics::dropout(next.h, dropout, train, rng) : next.h;
  }
  return input;
}

}  // namespace clarigen::seq2seq
