#pragma once

#include "parse/tape.hpp"

namespace parse::nn {

// Recurrent state of one LSTM predictor, both vectors of the hidden dim.
struct RecurrentState {
    VecD hidden;
    VecD cell;
};

struct CellVals {
    Tape::Val h;
    Tape::Val c;
};

// Parameter set for one predictor level: a single-layer LSTM plus an output
// head. Tensors, with H the hidden dim and D_in/D_out the level's io dims:
//   w_x [4H x D_in], w_h [4H x H], b [4H]   gate order i, f, g, o
//   w_out [D_out x H], b_out [D_out]
// Weights are uniform in +-1/sqrt(H); biases zero except the forget gate
// slice of b, which starts at 1.
Parameters make_level_params(int input_dim, int hidden_dim, int output_dim, Rng& rng);

// One LSTM step on the tape:
//   z = w_x x + b + w_h h
//   c' = sigmoid(z_f) * c + sigmoid(z_i) * tanh(z_g)
//   h' = sigmoid(z_o) * tanh(c')
// The returned h is also the cell's output.
CellVals lstm_cell(Tape& tape, Parameters& params, Tape::Val x, CellVals state);

// Convenience wrapper over plain vectors: records the computation on a fresh
// internal evaluation, returning the output and new state as values.
std::pair<VecD, RecurrentState> lstm_cell_forward(const VecD& x, const RecurrentState& state,
                                                  Parameters& params);

// Output head: w_out h + b_out.
Tape::Val output_head(Tape& tape, Parameters& params, Tape::Val h);

// Forward-only scaled dot-product attention over plain vectors.
// Throws shape_error on empty memory or mismatched dims.
VecD attention(const VecD& query, const std::vector<VecD>& memory);

// The softmax weights attention uses, exposed for tests and diagnostics.
VecD attention_weights(const VecD& query, const std::vector<VecD>& memory);

}  // namespace parse::nn
