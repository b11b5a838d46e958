#include "odecast/adam.hpp"

#include <cmath>

#include "odecast/errors.hpp"

namespace odecast {

AdamState::AdamState(const ParamRegistry& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const NamedParam& p : params) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void AdamState::step(ParamRegistry& params) {
    if (params.size() != m_.size())
        throw ContractError("adam: registry size changed since construction");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p].tensor;
        if (!t.has_grad())
            throw ContractError("adam: parameter '" + params[p].name + "' has no gradient");
        const std::vector<double>& g = t.grad();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        std::vector<double>& w = t.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

std::size_t AdamState::state_size() const {
    std::size_t n = 0;
    for (const auto& m : m_) n += m.size();
    for (const auto& v : v_) n += v.size();
    return n;
}

} // namespace odecast
