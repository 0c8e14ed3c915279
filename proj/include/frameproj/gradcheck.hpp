#pragma once

#include <functional>
#include <vector>

#include "frameproj/tensor.hpp"

namespace frameproj {

// Central-difference gradient oracle. The forward callable must re-evaluate
// the scalar loss from the current parameter values on every call; it is
// invoked without an active tape for the probing evaluations, so it must not
// depend on one being present.

inline double grad_check(const std::function<Tensor()>& forward, const std::vector<Tensor>& params,
                         double step = 1e-5) {
    if (!(step > 0.0) || step > 1e-3) throw ContractError("grad_check: step must be in (0, 1e-3]");

    for (const Tensor& p : params)
        if (!p.requires_grad()) throw ContractError("grad_check: all params must require grad");

    // Reverse-mode gradients.
    std::vector<std::vector<double>> ad_grads;
    {
        for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
        Tape tape;
        Tensor loss = forward();
        tape.backward(loss);
        for (const Tensor& p : params) ad_grads.push_back(p.grad());
    }

    // Central differences, coordinate by coordinate.
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (size_t i = 0; i < p.size(); ++i) {
            const double orig = p.value()[i];
            p.mutable_value()[i] = orig + step;
            const double f_plus = forward().item();
            p.mutable_value()[i] = orig - step;
            const double f_minus = forward().item();
            p.mutable_value()[i] = orig;
            const double g_fd = (f_plus - f_minus) / (2.0 * step);
            const double g_ad = ad_grads[pi][i];
            const double rel = std::abs(g_ad - g_fd) / std::max({std::abs(g_ad), std::abs(g_fd), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace frameproj
