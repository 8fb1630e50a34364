#pragma once

#include <functional>
#include <vector>

#include "parse/tensor.hpp"

namespace parse::nn {

using VecD = std::vector<double>;

// Reverse-mode tape over vector-valued nodes. One tape lives for one
// optimization step: record the forward computation, call backward() once,
// then clear(). Activations are held as f64; parameter tensors stay f32 and
// receive gradient accumulation directly into their f64 grad slots.
//
// Nodes are created in topological order by construction, so backward() is a
// single reverse sweep. Same inputs give bit-identical values and gradients.
class Tape {
  public:
    struct Val {
        int id = -1;
        int n = 0;
    };

    Val constant(VecD v);
    Val constant(const float* p, int n);
    Val constant(const std::vector<float>& v) { return constant(v.data(), static_cast<int>(v.size())); }

    // y = W x + b. Gradients accumulate into W.g and b.g; the tensors must stay
    // alive and unmodified until backward() has run.
    Val affine(Tensor& W, Tensor& b, Val x);
    Val matvec(Tensor& W, Val x);

    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val slice(Val x, int offset, int n);
    Val concat(Val a, Val b);
    Val sigmoid(Val x);
    Val tanh_(Val x);

    // Scaled dot-product attention of one query over a memory list. All vectors
    // share the query's dimension; the scale is 1/sqrt(dim). Differentiates
    // through both the query and the memory entries.
    Val attention(Val q, const std::vector<Val>& memory);

    // scale * ||pred - target||^2 as a 1-dim node, f64 accumulation.
    Val sq_error_to_const(Val pred, VecD target, double scale);
    // L1 norm as a 1-dim node.
    Val l1_norm(Val x);

    Val weighted_sum(const std::vector<Val>& scalars, const std::vector<double>& weights);

    const VecD& value(Val v) const { return nodes_[v.id].val; }
    double scalar(Val v) const { return nodes_[v.id].val[0]; }

    // Seeds d(root)=1 and sweeps the tape in reverse. root must be 1-dim.
    void backward(Val root);

    void clear();
    size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        VecD val;
        VecD grad;
        std::function<void()> back;  // empty for leaves
    };
    std::vector<Node> nodes_;

    Val push(VecD v) {
        Val h{static_cast<int>(nodes_.size()), static_cast<int>(v.size())};
        nodes_.push_back(Node{std::move(v), {}, {}});
        return h;
    }
    VecD& grad(int id) { return nodes_[id].grad; }
    const VecD& val(int id) const { return nodes_[id].val; }
};

}  // namespace parse::nn
