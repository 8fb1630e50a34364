#include "parse/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parse::nn {

Tape::Val Tape::constant(VecD v) { return push(std::move(v)); }

Tape::Val Tape::constant(const float* p, int n) {
    VecD v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = static_cast<double>(p[i]);
    return push(std::move(v));
}

Tape::Val Tape::affine(Tensor& W, Tensor& b, Val x) {
    if (W.cols != x.n) throw shape_error("affine: " + W.name + " cols != input dim");
    if (b.rows != W.rows || b.cols != 1) throw shape_error("affine: bias shape mismatch for " + b.name);
    const VecD& xv = val(x.id);
    VecD y(static_cast<size_t>(W.rows));
    for (int r = 0; r < W.rows; ++r) {
        double acc = static_cast<double>(b.w[r]);
        const float* row = &W.w[static_cast<size_t>(r) * W.cols];
        for (int c = 0; c < W.cols; ++c) acc += static_cast<double>(row[c]) * xv[c];
        y[r] = acc;
    }
    Val out = push(std::move(y));
    Tensor* Wp = &W;
    Tensor* bp = &b;
    nodes_[out.id].back = [this, Wp, bp, x, out]() {
        const VecD& go = grad(out.id);
        const VecD& xv = val(x.id);
        VecD& gx = grad(x.id);
        for (int r = 0; r < Wp->rows; ++r) {
            const double gr = go[r];
            bp->g[r] += gr;
            double* grow = &Wp->g[static_cast<size_t>(r) * Wp->cols];
            const float* wrow = &Wp->w[static_cast<size_t>(r) * Wp->cols];
            for (int c = 0; c < Wp->cols; ++c) {
                grow[c] += gr * xv[c];
                gx[c] += static_cast<double>(wrow[c]) * gr;
            }
        }
    };
    return out;
}

Tape::Val Tape::matvec(Tensor& W, Val x) {
    if (W.cols != x.n) throw shape_error("matvec: " + W.name + " cols != input dim");
    const VecD& xv = val(x.id);
    VecD y(static_cast<size_t>(W.rows));
    for (int r = 0; r < W.rows; ++r) {
        double acc = 0.0;
        const float* row = &W.w[static_cast<size_t>(r) * W.cols];
        for (int c = 0; c < W.cols; ++c) acc += static_cast<double>(row[c]) * xv[c];
        y[r] = acc;
    }
    Val out = push(std::move(y));
    Tensor* Wp = &W;
    nodes_[out.id].back = [this, Wp, x, out]() {
        const VecD& go = grad(out.id);
        const VecD& xv = val(x.id);
        VecD& gx = grad(x.id);
        for (int r = 0; r < Wp->rows; ++r) {
            const double gr = go[r];
            double* grow = &Wp->g[static_cast<size_t>(r) * Wp->cols];
            const float* wrow = &Wp->w[static_cast<size_t>(r) * Wp->cols];
            for (int c = 0; c < Wp->cols; ++c) {
                grow[c] += gr * xv[c];
                gx[c] += static_cast<double>(wrow[c]) * gr;
            }
        }
    };
    return out;
}

Tape::Val Tape::add(Val a, Val b) {
    if (a.n != b.n) throw shape_error("add: dim mismatch");
    const VecD &av = val(a.id), &bv = val(b.id);
    VecD y(static_cast<size_t>(a.n));
    for (int i = 0; i < a.n; ++i) y[i] = av[i] + bv[i];
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, a, b, out]() {
        const VecD& go = grad(out.id);
        VecD &ga = grad(a.id), &gb = grad(b.id);
        for (int i = 0; i < out.n; ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    };
    return out;
}

Tape::Val Tape::sub(Val a, Val b) {
    if (a.n != b.n) throw shape_error("sub: dim mismatch");
    const VecD &av = val(a.id), &bv = val(b.id);
    VecD y(static_cast<size_t>(a.n));
    for (int i = 0; i < a.n; ++i) y[i] = av[i] - bv[i];
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, a, b, out]() {
        const VecD& go = grad(out.id);
        VecD &ga = grad(a.id), &gb = grad(b.id);
        for (int i = 0; i < out.n; ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    };
    return out;
}

Tape::Val Tape::mul(Val a, Val b) {
    if (a.n != b.n) throw shape_error("mul: dim mismatch");
    const VecD &av = val(a.id), &bv = val(b.id);
    VecD y(static_cast<size_t>(a.n));
    for (int i = 0; i < a.n; ++i) y[i] = av[i] * bv[i];
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, a, b, out]() {
        const VecD& go = grad(out.id);
        const VecD &av = val(a.id), &bv = val(b.id);
        VecD &ga = grad(a.id), &gb = grad(b.id);
        for (int i = 0; i < out.n; ++i) {
            ga[i] += go[i] * bv[i];
            gb[i] += go[i] * av[i];
        }
    };
    return out;
}

Tape::Val Tape::slice(Val x, int offset, int n) {
    if (offset < 0 || n <= 0 || offset + n > x.n) throw shape_error("slice: range out of bounds");
    const VecD& xv = val(x.id);
    VecD y(xv.begin() + offset, xv.begin() + offset + n);
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, x, out, offset]() {
        const VecD& go = grad(out.id);
        VecD& gx = grad(x.id);
        for (int i = 0; i < out.n; ++i) gx[offset + i] += go[i];
    };
    return out;
}

Tape::Val Tape::concat(Val a, Val b) {
    const VecD &av = val(a.id), &bv = val(b.id);
    VecD y;
    y.reserve(static_cast<size_t>(a.n + b.n));
    y.insert(y.end(), av.begin(), av.end());
    y.insert(y.end(), bv.begin(), bv.end());
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, a, b, out]() {
        const VecD& go = grad(out.id);
        VecD &ga = grad(a.id), &gb = grad(b.id);
        for (int i = 0; i < a.n; ++i) ga[i] += go[i];
        for (int i = 0; i < b.n; ++i) gb[i] += go[a.n + i];
    };
    return out;
}

Tape::Val Tape::sigmoid(Val x) {
    const VecD& xv = val(x.id);
    VecD y(static_cast<size_t>(x.n));
    for (int i = 0; i < x.n; ++i) y[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, x, out]() {
        const VecD& go = grad(out.id);
        const VecD& yv = val(out.id);
        VecD& gx = grad(x.id);
        for (int i = 0; i < out.n; ++i) gx[i] += go[i] * yv[i] * (1.0 - yv[i]);
    };
    return out;
}

Tape::Val Tape::tanh_(Val x) {
    const VecD& xv = val(x.id);
    VecD y(static_cast<size_t>(x.n));
    for (int i = 0; i < x.n; ++i) y[i] = std::tanh(xv[i]);
    Val out = push(std::move(y));
    nodes_[out.id].back = [this, x, out]() {
        const VecD& go = grad(out.id);
        const VecD& yv = val(out.id);
        VecD& gx = grad(x.id);
        for (int i = 0; i < out.n; ++i) gx[i] += go[i] * (1.0 - yv[i] * yv[i]);
    };
    return out;
}

Tape::Val Tape::attention(Val q, const std::vector<Val>& memory) {
    if (memory.empty()) throw shape_error("attention: memory must be non-empty");
    const int d = q.n;
    for (const Val& m : memory)
        if (m.n != d) throw shape_error("attention: memory entry dim != query dim");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const size_t K = memory.size();

    const VecD& qv = val(q.id);
    VecD logits(K);
    double maxl = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < K; ++k) {
        const VecD& mv = val(memory[k].id);
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += qv[i] * mv[i];
        logits[k] = dot * scale;
        maxl = std::max(maxl, logits[k]);
    }
    VecD alpha(K);
    double z = 0.0;
    for (size_t k = 0; k < K; ++k) {
        alpha[k] = std::exp(logits[k] - maxl);
        z += alpha[k];
    }
    for (size_t k = 0; k < K; ++k) alpha[k] /= z;

    VecD ctx(static_cast<size_t>(d), 0.0);
    for (size_t k = 0; k < K; ++k) {
        const VecD& mv = val(memory[k].id);
        for (int i = 0; i < d; ++i) ctx[i] += alpha[k] * mv[i];
    }
    Val out = push(std::move(ctx));
    std::vector<Val> mem = memory;
    nodes_[out.id].back = [this, q, mem, out, alpha, scale]() {
        const VecD& go = grad(out.id);
        const VecD& qv = val(q.id);
        const int d = out.n;
        const size_t K = mem.size();
        // s_k = d(ctx).m_k, then softmax backward through the logits
        VecD s(K);
        double sbar = 0.0;
        for (size_t k = 0; k < K; ++k) {
            const VecD& mv = val(mem[k].id);
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += go[i] * mv[i];
            s[k] = dot;
            sbar += alpha[k] * dot;
        }
        VecD& gq = grad(q.id);
        for (size_t k = 0; k < K; ++k) {
            const double dz = alpha[k] * (s[k] - sbar);
            const VecD& mv = val(mem[k].id);
            VecD& gm = grad(mem[k].id);
            for (int i = 0; i < d; ++i) {
                gq[i] += dz * mv[i] * scale;
                gm[i] += alpha[k] * go[i] + dz * qv[i] * scale;
            }
        }
    };
    return out;
}

Tape::Val Tape::sq_error_to_const(Val pred, VecD target, double scale) {
    if (static_cast<int>(target.size()) != pred.n) throw shape_error("sq_error: target dim mismatch");
    const VecD& pv = val(pred.id);
    double acc = 0.0;
    for (int i = 0; i < pred.n; ++i) {
        const double e = pv[i] - target[i];
        acc += e * e;
    }
    Val out = push(VecD{acc * scale});
    nodes_[out.id].back = [this, pred, out, target = std::move(target), scale]() {
        const double go = grad(out.id)[0];
        const VecD& pv = val(pred.id);
        VecD& gp = grad(pred.id);
        for (int i = 0; i < pred.n; ++i) gp[i] += go * scale * 2.0 * (pv[i] - target[i]);
    };
    return out;
}

Tape::Val Tape::l1_norm(Val x) {
    const VecD& xv = val(x.id);
    double acc = 0.0;
    for (int i = 0; i < x.n; ++i) acc += std::abs(xv[i]);
    Val out = push(VecD{acc});
    nodes_[out.id].back = [this, x, out]() {
        const double go = grad(out.id)[0];
        const VecD& xv = val(x.id);
        VecD& gx = grad(x.id);
        for (int i = 0; i < x.n; ++i) gx[i] += go * (xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0));
    };
    return out;
}

Tape::Val Tape::weighted_sum(const std::vector<Val>& scalars, const std::vector<double>& weights) {
    if (scalars.size() != weights.size()) throw shape_error("weighted_sum: length mismatch");
    double acc = 0.0;
    for (size_t k = 0; k < scalars.size(); ++k) {
        if (scalars[k].n != 1) throw shape_error("weighted_sum: inputs must be scalars");
        acc += weights[k] * val(scalars[k].id)[0];
    }
    Val out = push(VecD{acc});
    std::vector<Val> in = scalars;
    std::vector<double> w = weights;
    nodes_[out.id].back = [this, in, w, out]() {
        const double go = grad(out.id)[0];
        for (size_t k = 0; k < in.size(); ++k) grad(in[k].id)[0] += go * w[k];
    };
    return out;
}

void Tape::backward(Val root) {
    if (root.n != 1) throw shape_error("backward: root must be scalar");
    for (int i = 0; i <= root.id; ++i) nodes_[i].grad.assign(nodes_[i].val.size(), 0.0);
    nodes_[root.id].grad[0] = 1.0;
    for (int i = root.id; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back();
}

void Tape::clear() { nodes_.clear(); }

}  // namespace parse::nn
