#include "parse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parse::nn {

Parameters make_level_params(int input_dim, int hidden_dim, int output_dim, Rng& rng) {
    if (input_dim <= 0 || hidden_dim <= 0 || output_dim <= 0)
        throw config_error("level dims must be positive");
    Parameters p;
    const int H = hidden_dim;
    // add() may reallocate the tensor table, so never hold references across
    // adds: build the full table first, then fill by lookup.
    p.add("w_x", 4 * H, input_dim);
    p.add("w_h", 4 * H, H);
    p.add("b", 4 * H, 1);
    p.add("w_out", output_dim, H);
    p.add("b_out", output_dim, 1);

    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    auto fill = [&](const char* name) {
        for (auto& w : p.at(name).w)
            w = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    };
    fill("w_x");
    fill("w_h");
    fill("w_out");
    // forget-gate bias starts at 1 for stable early memory
    Tensor& b = p.at("b");
    for (int i = H; i < 2 * H; ++i) b.w[i] = 1.0f;
    return p;
}

CellVals lstm_cell(Tape& tape, Parameters& params, Tape::Val x, CellVals state) {
    Tensor& wx = params.at("w_x");
    Tensor& wh = params.at("w_h");
    Tensor& b = params.at("b");
    const int H = wh.cols;
    if (state.h.n != H || state.c.n != H) throw shape_error("lstm_cell: state dim != hidden dim");

    Tape::Val z = tape.add(tape.affine(wx, b, x), tape.matvec(wh, state.h));
    Tape::Val gi = tape.sigmoid(tape.slice(z, 0, H));
    Tape::Val gf = tape.sigmoid(tape.slice(z, H, H));
    Tape::Val gg = tape.tanh_(tape.slice(z, 2 * H, H));
    Tape::Val go = tape.sigmoid(tape.slice(z, 3 * H, H));
    Tape::Val c_new = tape.add(tape.mul(gf, state.c), tape.mul(gi, gg));
    Tape::Val h_new = tape.mul(go, tape.tanh_(c_new));
    return {h_new, c_new};
}

std::pair<VecD, RecurrentState> lstm_cell_forward(const VecD& x, const RecurrentState& state,
                                                  Parameters& params) {
    Tape tape;
    CellVals st{tape.constant(state.hidden), tape.constant(state.cell)};
    CellVals out = lstm_cell(tape, params, tape.constant(x), st);
    return {tape.value(out.h), RecurrentState{tape.value(out.h), tape.value(out.c)}};
}

Tape::Val output_head(Tape& tape, Parameters& params, Tape::Val h) {
    return tape.affine(params.at("w_out"), params.at("b_out"), h);
}

VecD attention_weights(const VecD& query, const std::vector<VecD>& memory) {
    if (memory.empty()) throw shape_error("attention: memory must be non-empty");
    const int d = static_cast<int>(query.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    VecD logits(memory.size());
    double maxl = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < memory.size(); ++k) {
        if (static_cast<int>(memory[k].size()) != d)
            throw shape_error("attention: memory entry dim != query dim");
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += query[i] * memory[k][i];
        logits[k] = dot * scale;
        maxl = std::max(maxl, logits[k]);
    }
    double z = 0.0;
    VecD alpha(memory.size());
    for (size_t k = 0; k < memory.size(); ++k) {
        alpha[k] = std::exp(logits[k] - maxl);
        z += alpha[k];
    }
    for (auto& a : alpha) a /= z;
    return alpha;
}

VecD attention(const VecD& query, const std::vector<VecD>& memory) {
    const VecD alpha = attention_weights(query, memory);
    VecD ctx(query.size(), 0.0);
    for (size_t k = 0; k < memory.size(); ++k)
        for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += alpha[k] * memory[k][i];
    return ctx;
}

}  // namespace parse::nn
