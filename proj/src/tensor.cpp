#include "parse/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace parse::nn {

bool adam_step(Parameters& params, OptimizerState& opt) {
    if (opt.slots.size() != params.tensors.size())
        throw shape_error("optimizer state does not match parameter set");
    if (!params.grads_finite()) return false;

    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

    for (size_t k = 0; k < params.tensors.size(); ++k) {
        Tensor& t = params.tensors[k];
        auto& slot = opt.slots[k];
        if (static_cast<int>(slot.m.size()) != t.size())
            throw shape_error("moment shape mismatch for " + t.name);
        for (int i = 0; i < t.size(); ++i) {
            const double g = t.g[i];
            slot.m[i] = opt.beta1 * slot.m[i] + (1.0 - opt.beta1) * g;
            slot.v[i] = opt.beta2 * slot.v[i] + (1.0 - opt.beta2) * g * g;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            t.w[i] = static_cast<float>(static_cast<double>(t.w[i]) -
                                        opt.lr * mhat / (std::sqrt(vhat) + opt.eps));
        }
    }
    return true;
}

double grad_check(const std::function<double(Parameters&, bool)>& f, Parameters& point, double eps) {
    if (eps <= 0.0) throw config_error("grad_check eps must be positive");

    point.zero_grad();
    f(point, true);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(point.tensors.size());
    for (const auto& t : point.tensors) analytic.push_back(t.g);

    double worst = 0.0;
    for (size_t k = 0; k < point.tensors.size(); ++k) {
        Tensor& t = point.tensors[k];
        for (int i = 0; i < t.size(); ++i) {
            const float orig = t.w[i];
            const float hi = static_cast<float>(static_cast<double>(orig) + eps);
            const float lo = static_cast<float>(static_cast<double>(orig) - eps);

            t.w[i] = hi;
            const double fhi = f(point, false);
            t.w[i] = lo;
            const double flo = f(point, false);
            t.w[i] = orig;

            // f32 rounding can move the endpoints; divide by the achieved span.
            const double span = static_cast<double>(hi) - static_cast<double>(lo);
            const double fd = (fhi - flo) / span;
            const double an = analytic[k][i];
            // Mixed comparison: a difference quotient of an O(1) objective over a
            // ~2*eps span carries ~1e-11 of f64 rounding noise, so gradients far
            // below the floor are judged absolutely at the floor's scale instead
            // of drowning in that noise.
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    point.zero_grad();
    f(point, true);  // leave gradients at the unperturbed point
    return worst;
}

}  // namespace parse::nn
