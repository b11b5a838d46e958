#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code
// only and never calls backward(), so it stays independent of the reverse-mode
// path it is used to verify.

#include <cmath>
#include <functional>
#include <vector>

#include "odecast/tensor.hpp"

namespace odecast::testing {

// f recomputes the scalar loss from scratch using current tensor values.
using LossFn = std::function<double()>;

struct FdCheck {
    double max_abs_diff = 0.0;
    double max_rel_diff = 0.0;
    bool ok = true;
};

inline double central_difference(const LossFn& f, double& slot, double h) {
    const double saved = slot;
    slot = saved + h;
    const double up = f();
    slot = saved - h;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * h);
}

// Compares the `grad` currently stored on `param` against central differences
// of f wrt every entry of `param`.
inline FdCheck check_gradient(const LossFn& f, odecast::Tensor param, double rtol = 1e-4,
                              double h = 1e-5, double atol = 1e-7) {
    FdCheck result;
    const std::vector<double>& grad = param.grad();
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double numeric = central_difference(f, param.values()[i], h);
        const double analytic = grad[i];
        const double diff = std::abs(numeric - analytic);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-12});
        result.max_abs_diff = std::max(result.max_abs_diff, diff);
        result.max_rel_diff = std::max(result.max_rel_diff, diff / scale);
        if (diff > atol && diff / scale > rtol) result.ok = false;
    }
    return result;
}

inline FdCheck check_gradients(const LossFn& f, const std::vector<odecast::Tensor>& params,
                               double rtol = 1e-4, double h = 1e-5, double atol = 1e-7) {
    FdCheck worst;
    for (const odecast::Tensor& p : params) {
        FdCheck c = check_gradient(f, p, rtol, h, atol);
        worst.max_abs_diff = std::max(worst.max_abs_diff, c.max_abs_diff);
        worst.max_rel_diff = std::max(worst.max_rel_diff, c.max_rel_diff);
        worst.ok = worst.ok && c.ok;
    }
    return worst;
}

} // namespace odecast::testing
