#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "odecast/params.hpp"
#include "odecast/rng.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

// Dense layer y = W x + b with W[out x in]. Accepts a rank-1 sample or a
// rank-2 batch (one sample per row).
class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    Tensor apply(Tape& tape, const Tensor& x) const;

    std::size_t in_dim() const { return weight_.defined() ? weight_.cols() : 0; }
    std::size_t out_dim() const { return weight_.defined() ? weight_.rows() : 0; }

    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }

    void register_params(ParamRegistry& reg, const std::string& prefix) const;

private:
    Tensor weight_;
    Tensor bias_;
};

// One-step GRU cell over concat(x, h). Gate parameters each span
// (in + hidden) inputs; parameter count is 3*(in+hidden+1)*hidden.
class GruCell {
public:
    GruCell() = default;
    GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    // x: [in] or [b x in]; h_prev matching rank with hidden width.
    Tensor step(Tape& tape, const Tensor& x, const Tensor& h_prev) const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden_dim() const { return hidden_dim_; }
    std::size_t param_count() const;

    void register_params(ParamRegistry& reg, const std::string& prefix) const;

private:
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    Tensor w_update_, b_update_;
    Tensor w_reset_, b_reset_;
    Tensor w_cand_, b_cand_;
};

// One-step LSTM cell over concat(x, h); hidden and cell share a dimension.
// Parameter count is 4*(in+hidden+1)*hidden.
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    // Returns (h, c).
    std::pair<Tensor, Tensor> step(Tape& tape, const Tensor& x, const Tensor& h_prev,
                                   const Tensor& c_prev) const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden_dim() const { return hidden_dim_; }
    std::size_t param_count() const;

    void register_params(ParamRegistry& reg, const std::string& prefix) const;

private:
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    Tensor w_input_, b_input_;
    Tensor w_forget_, b_forget_;
    Tensor w_output_, b_output_;
    Tensor w_cand_, b_cand_;
};

// Latent derivative network: (z, t) -> dz/dt. Two dense layers with a tanh
// between them; t is appended to z as one extra input feature.
class DynamicsNet {
public:
    DynamicsNet() = default;
    DynamicsNet(std::size_t latent_dim, std::size_t width, Rng& rng);

    // z: [latent] or [b x latent]; the same t is used for the whole batch.
    Tensor eval(Tape& tape, const Tensor& z, double t) const;

    std::size_t latent_dim() const { return latent_dim_; }

    void register_params(ParamRegistry& reg, const std::string& prefix) const;

private:
    std::size_t latent_dim_ = 0;
    LinearLayer fc1_;
    LinearLayer fc2_;
};

} // namespace odecast
