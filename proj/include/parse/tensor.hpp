#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "parse/common.hpp"

namespace parse::nn {

// Dense real matrix (cols == 1 for vectors). Values are stored as f32, the
// gradient slot as f64 so accumulation stays exact enough for gradient checks.
// Shape is fixed at construction.
struct Tensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<float> w;
    std::vector<double> g;

    Tensor() = default;
    Tensor(std::string n, int r, int c)
        : name(std::move(n)), rows(r), cols(c), w(static_cast<size_t>(r) * c, 0.0f),
          g(static_cast<size_t>(r) * c, 0.0) {
        if (r <= 0 || c <= 0) throw shape_error("tensor shape must be positive: " + name);
    }

    int size() const { return rows * cols; }
    float& at(int r, int c) { return w[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return w[static_cast<size_t>(r) * cols + c]; }
};

// Named, ordered collection of tensors. Order is part of the identity: iteration,
// serialization, and optimizer state all follow it.
struct Parameters {
    std::vector<Tensor> tensors;

    Tensor& add(const std::string& name, int rows, int cols) {
        for (const auto& t : tensors)
            if (t.name == name) throw config_error("duplicate parameter name: " + name);
        tensors.emplace_back(name, rows, cols);
        return tensors.back();
    }

    Tensor& at(const std::string& name) {
        for (auto& t : tensors)
            if (t.name == name) return t;
        throw config_error("no parameter named: " + name);
    }
    const Tensor& at(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw config_error("no parameter named: " + name);
    }

    void zero_grad() {
        for (auto& t : tensors) std::fill(t.g.begin(), t.g.end(), 0.0);
    }

    int scalar_count() const {
        int n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }

    bool grads_finite() const {
        for (const auto& t : tensors)
            if (!all_finite(t.g)) return false;
        return true;
    }

    // FNV-1a over the raw f32 bytes, in tensor order. Used by tests to assert
    // bit-identical parameter states.
    std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& t : tensors) {
            const auto* p = reinterpret_cast<const unsigned char*>(t.w.data());
            for (size_t i = 0; i < t.w.size() * sizeof(float); ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        }
        return h;
    }
};

// ADAM accumulators for one Parameters set. Moments are f64 and mirror the
// parameter shapes; `step` counts completed updates.
struct OptimizerState {
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots;
    long long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    OptimizerState() = default;
    OptimizerState(const Parameters& params, double lr_) : lr(lr_) {
        slots.reserve(params.tensors.size());
        for (const auto& t : params.tensors)
            slots.push_back({std::vector<double>(t.size(), 0.0), std::vector<double>(t.size(), 0.0)});
    }
};

// Bias-corrected ADAM update from the gradients currently held in `params`.
// Returns false (and applies nothing, not even moment decay) when any gradient
// is non-finite; the caller decides whether to skip or abort.
bool adam_step(Parameters& params, OptimizerState& opt);

// Max over all parameter scalars of the disagreement between the analytic
// gradient and a central finite difference of f: |an - fd| relative to
// max(|an|, |fd|, 1e-6). The absolute floor means gradients much smaller than
// the rounding noise of the difference quotient are compared absolutely.
//
// f(params, with_grad): returns the scalar value; when with_grad is true it must
// also leave d(value)/d(param) in the gradient slots. The denominator of each
// finite difference is the perturbation actually achieved after f32 rounding.
double grad_check(const std::function<double(Parameters&, bool)>& f, Parameters& point, double eps);

}  // namespace parse::nn
