#pragma once

#include <string>
#include <vector>

#include "odecast/tensor.hpp"

namespace odecast {

// A trainable tensor with a stable name. The ordered list of these is the
// unit of checkpointing and optimizer state.
struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamRegistry = std::vector<NamedParam>;

inline void zero_grads(ParamRegistry& params) {
    for (NamedParam& p : params) p.tensor.zero_grad();
}

inline std::size_t total_param_count(const ParamRegistry& params) {
    std::size_t n = 0;
    for (const NamedParam& p : params) n += p.tensor.size();
    return n;
}

} // namespace odecast
