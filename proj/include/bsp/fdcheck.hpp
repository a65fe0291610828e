#pragma once

#include "bsp/rng.hpp"
#include "bsp/tape.hpp"

namespace bsp {

struct FdReport {
    double max_rel_err = 0.0;
    int checked = 0;
    int configs = 0;
    int rejected = 0; // configurations discarded for sitting too close to a kink
};

// Central-difference check of the analytic gradients produced by a graph
// builder. The builder receives a fresh tape plus the parameter store and
// returns the scalar loss node. A configuration is accepted only when every
// activation input (and extremum tie gap) observed during the forward pass is
// at least 10*eps away from a kink; rejected configurations are counted and
// the caller resamples parameters.
template <typename S, typename BuildFn>
bool fd_check_once(ParamStore<S>& params, BuildFn&& build, double eps,
                   int entries_per_tensor, Rng& rng, FdReport& report) {
    Tape<S> tape;
    int loss = build(tape, params);
    if (tape.kink_margin() < 10.0 * eps) {
        ++report.rejected;
        return false;
    }
    tape.backward(loss);
    GradBuffer<S> analytic(params);
    tape.accumulate_param_grads(analytic);

    auto loss_at = [&]() {
        Tape<S> t;
        int l = build(t, params);
        return double(t.val(l)[0]);
    };

    for (int slot = 0; slot < params.count(); ++slot) {
        Tensor<S>& p = params[slot];
        size_t n = p.numel();
        if (n == 0) continue;
        std::vector<size_t> picks;
        if (int(n) <= entries_per_tensor) {
            for (size_t i = 0; i < n; ++i) picks.push_back(i);
        } else {
            for (int i = 0; i < entries_per_tensor; ++i)
                picks.push_back(size_t(rng.next_u64() % uint64_t(n)));
        }
        for (size_t idx : picks) {
            const S saved = p[idx];
            p[idx] = S(double(saved) + eps);
            double lp = loss_at();
            p[idx] = S(double(saved) - eps);
            double lm = loss_at();
            p[idx] = saved;
            double fd = (lp - lm) / (2.0 * eps);
            double an = double(analytic.grads[size_t(slot)][idx]);
            double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            double rel = std::abs(fd - an) / denom;
            report.max_rel_err = std::max(report.max_rel_err, rel);
            ++report.checked;
        }
    }
    ++report.configs;
    return true;
}

// Convenience wrapper matching the single-parameter contract: checks every
// entry (or a sample) of one parameter tensor and returns the max relative
// error over that tensor.
template <typename S, typename BuildFn>
double finite_difference_check(ParamStore<S>& params, int slot, BuildFn&& build,
                               double eps = 1e-4, int entries = 64) {
    if (eps <= 0.0) throw std::invalid_argument("finite_difference_check: eps must be positive");
    Tape<S> tape;
    int loss = build(tape, params);
    tape.backward(loss);
    GradBuffer<S> analytic(params);
    tape.accumulate_param_grads(analytic);

    Tensor<S>& p = params[slot];
    Rng rng(0x5eedull ^ uint64_t(slot));
    double worst = 0.0;
    size_t n = p.numel();
    size_t count = std::min<size_t>(n, size_t(entries));
    for (size_t k = 0; k < count; ++k) {
        size_t idx = (n <= size_t(entries)) ? k : size_t(rng.next_u64() % uint64_t(n));
        const S saved = p[idx];
        auto loss_at = [&]() {
            Tape<S> t;
            int l = build(t, params);
            return double(t.val(l)[0]);
        };
        p[idx] = S(double(saved) + eps);
        double lp = loss_at();
        p[idx] = S(double(saved) - eps);
        double lm = loss_at();
        p[idx] = saved;
        double fd = (lp - lm) / (2.0 * eps);
        double an = double(analytic.grads[size_t(slot)][idx]);
        double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

} // namespace bsp
