#pragma once

#include <cstddef>
#include <vector>

#include "odecast/params.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with the standard bias correction. Moment buffers are allocated to
// match the registry handed to the constructor; step() applies one update
// from the gradients currently stored on the parameters.
class AdamState {
public:
    explicit AdamState(const ParamRegistry& params, AdamConfig cfg = {});

    // theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    // Throws ContractError if any parameter is missing its gradient.
    void step(ParamRegistry& params);

    std::size_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

    const std::vector<double>& first_moment(std::size_t param_index) const {
        return m_.at(param_index);
    }
    const std::vector<double>& second_moment(std::size_t param_index) const {
        return v_.at(param_index);
    }

    // Retained optimizer state in doubles (used by the buffer-freedom probe).
    std::size_t state_size() const;

private:
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t step_count_ = 0;
};

} // namespace odecast
