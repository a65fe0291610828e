#pragma once

#include "bsp/tensor.hpp"

namespace bsp {

// Adam with bias correction. A step with any non-finite gradient entry is
// rejected without touching parameters or moments.
template <typename S>
struct Adam {
    double step_size;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    std::vector<Tensor<S>> m, v;

    explicit Adam(const ParamStore<S>& params, double step = 1e-4) : step_size(step) {
        for (const auto& e : params.entries) {
            m.emplace_back(e.value.shape);
            v.emplace_back(e.value.shape);
        }
    }

    bool step(ParamStore<S>& params, const GradBuffer<S>& grads) {
        if (!grads.all_finite()) return false;
        ++t;
        const double c1 = 1.0 - std::pow(beta1, double(t));
        const double c2 = 1.0 - std::pow(beta2, double(t));
        for (size_t s = 0; s < m.size(); ++s) {
            auto& p = params[int(s)].data;
            const auto& g = grads.grads[s].data;
            auto& ms = m[s].data;
            auto& vs = v[s].data;
            for (size_t i = 0; i < p.size(); ++i) {
                const double gi = double(g[i]);
                const double mi = beta1 * double(ms[i]) + (1.0 - beta1) * gi;
                const double vi = beta2 * double(vs[i]) + (1.0 - beta2) * gi * gi;
                ms[i] = S(mi);
                vs[i] = S(vi);
                p[i] = S(double(p[i]) - step_size * (mi / c1) / (std::sqrt(vi / c2) + eps));
            }
        }
        return true;
    }
};

} // namespace bsp
