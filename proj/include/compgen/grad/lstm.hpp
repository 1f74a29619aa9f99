#pragma once

#include <string>

#include "compgen/grad/ops.hpp"
#include "compgen/grad/params.hpp"

namespace compgen::grad {

struct LstmState {
  Var h;
  Var c;
};

/// Weight names under `prefix`: `.w_input` [4H x In], `.w_hidden` [4H x H],
/// `.bias` [4H]. Gate blocks are ordered input, forget, output, candidate.
void add_lstm_params(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng,
                     double init_scale = 0.1);

/// Bound tape handles for one LSTM's weights.
struct LstmWeights {
  Var w_input;
  Var w_hidden;
  Var bias;
  std::size_t hidden = 0;

  static LstmWeights bind(Tape& tape, ParamSet& params, const std::string& prefix);
};

/// One cell update on a batch: x [N x In], h/c [N x H].
///   i, f, o = sigmoid(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_step(const LstmState& state, const Var& x, const LstmWeights& weights);

}  // namespace compgen::grad
