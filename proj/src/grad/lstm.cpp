#include "compgen/grad/lstm.hpp"

namespace compgen::grad {

void add_lstm_params(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng,
                     double init_scale) {
  params.add_uniform(prefix + ".w_input", {4 * hidden, input}, rng, init_scale);
  params.add_uniform(prefix + ".w_hidden", {4 * hidden, hidden}, rng, init_scale);
  params.add_uniform(prefix + ".bias", {4 * hidden}, rng, init_scale);
}

LstmWeights LstmWeights::bind(Tape& tape, ParamSet& params, const std::string& prefix) {
  LstmWeights w;
  w.w_input = tape.parameter(params[prefix + ".w_input"]);
  w.w_hidden = tape.parameter(params[prefix + ".w_hidden"]);
  w.bias = tape.parameter(params[prefix + ".bias"]);
  w.hidden = params[prefix + ".bias"].value.size() / 4;
  return w;
}

LstmState lstm_step(const LstmState& state, const Var& x, const LstmWeights& weights) {
  const std::size_t hidden = weights.hidden;
  const auto& hs = state.h.shape();
  if (hs != state.c.shape() || hs.size() != 2 || hs[1] != hidden) {
    throw DimensionError("lstm_step: state shape " + shape_string(hs) + " does not match hidden size " +
                         std::to_string(hidden));
  }
  if (x.shape().size() != 2 || x.shape()[0] != hs[0] || x.shape()[1] != weights.w_input.shape()[1]) {
    throw DimensionError("lstm_step: input shape " + shape_string(x.shape()) + " does not match weights");
  }
  Tape& tape = x.tape();
  const Var zero_bias = tape.constant(Tensor({4 * hidden}, 0.0));
  const Var gates = add(linear(x, weights.w_input, weights.bias), linear(state.h, weights.w_hidden, zero_bias));
  const Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  const Var forget_gate = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  const Var out_gate = sigmoid(slice_cols(gates, 2 * hidden, 3 * hidden));
  const Var candidate = tanh(slice_cols(gates, 3 * hidden, 4 * hidden));
  const Var c_next = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  const Var h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

}  // namespace compgen::grad
