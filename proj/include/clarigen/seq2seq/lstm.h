#pragma once

#include <string>
#include <vector>

#include "clarigen/numerics/graph.h"

namespace clarigen::seq2seq {

using numerics::Expr;
using numerics::Graph;
using numerics::ParameterSet;
using numerics::ParamId;

// One LSTM layer. Gates are computed as [x; h]·w + b with w of shape
// (input + hidden) x 4·hidden, columns ordered input, forget, cell, output.
struct LstmLayer {
  ParamId w = 0;
  ParamId b = 0;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

struct LstmState {
  Expr h;
  Expr c;
};

LstmLayer add_lstm_layer(ParameterSet& params, const std::string& prefix, std::size_t input,
                         std::size_t hidden, numerics::Rng& rng);

LstmState zero_state(Graph& g, std::size_t batch, std::size_t hidden);

LstmState lstm_step(Graph& g, ParameterSet& params, const LstmLayer& layer, Expr x,
                    const LstmState& prev);

// Step through a layer stack. Rows with active[r] == false keep their previous
// state. Dropout is applied to the output of every layer except the last.
// Returns the top-layer output for this step.
Expr lstm_stack_step(Graph& g, ParameterSet& params, const std::vector<LstmLayer>& layers,
                     Expr x, std::vector<LstmState>& states, const std::vector<bool>& active,
                     double dropout, bool train, numerics::Rng& rng);

}  // namespace clarigen::seq2seq
