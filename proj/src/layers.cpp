#include "odecast/layers.hpp"

#include <cassert>
#include <cmath>

#include "odecast/errors.hpp"

namespace odecast {

namespace {

Tensor init_weight(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    Tensor w = Tensor::zeros({out_dim, in_dim});
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    w.set_requires_grad(true);
    return w;
}

Tensor init_bias(std::size_t out_dim) {
    Tensor b = Tensor::zeros({out_dim});
    b.set_requires_grad(true);
    return b;
}

// Promote a rank-1 sample to a single-row matrix for the shared batch path.
// Goes through reshape so the gradient path back to x stays on the tape.
Tensor as_matrix(Tape& tape, const Tensor& x) {
    if (x.rank() == 2) return x;
    if (x.rank() == 1) return reshape(tape, x, {1, x.size()});
    throw DimensionError("layer input must be rank-1 or rank-2");
}

} // namespace

// --- LinearLayer -----------------------------------------------------------

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight_(init_weight(out_dim, in_dim, rng)), bias_(init_bias(out_dim)) {}

Tensor LinearLayer::apply(Tape& tape, const Tensor& x) const {
    const bool vector_input = x.rank() == 1;
    if ((vector_input ? x.size() : x.cols()) != in_dim())
        throw DimensionError("linear: input width does not match layer");
    Tensor xm = as_matrix(tape, x);
    Tensor y = add_row(tape, matmul_bt(tape, xm, weight_), bias_);
    return vector_input ? take_row(tape, y, 0) : y;
}

void LinearLayer::register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.push_back({prefix + ".weight", weight_});
    reg.push_back({prefix + ".bias", bias_});
}

// --- GruCell ---------------------------------------------------------------

GruCell::GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
    const std::size_t joint = input_dim + hidden_dim;
    w_update_ = init_weight(hidden_dim, joint, rng);
    b_update_ = init_bias(hidden_dim);
    w_reset_ = init_weight(hidden_dim, joint, rng);
    b_reset_ = init_bias(hidden_dim);
    w_cand_ = init_weight(hidden_dim, joint, rng);
    b_cand_ = init_bias(hidden_dim);
    assert(param_count() == 3 * (input_dim + hidden_dim + 1) * hidden_dim);
}

std::size_t GruCell::param_count() const {
    return w_update_.size() + b_update_.size() + w_reset_.size() + b_reset_.size() +
           w_cand_.size() + b_cand_.size();
}

Tensor GruCell::step(Tape& tape, const Tensor& x, const Tensor& h_prev) const {
    const bool vector_input = x.rank() == 1;
    const std::size_t xw = vector_input ? x.size() : x.cols();
    const std::size_t hw = h_prev.rank() == 1 ? h_prev.size() : h_prev.cols();
    if (xw != input_dim_ || hw != hidden_dim_)
        throw DimensionError("gru: input/hidden widths do not match cell");
    if (x.rank() != h_prev.rank())
        throw DimensionError("gru: x and h_prev must share rank");

    Tensor xh = concat(tape, x, h_prev);
    Tensor xm = as_matrix(tape, xh);

    Tensor z = sigmoid(tape, add_row(tape, matmul_bt(tape, xm, w_update_), b_update_));
    Tensor r = sigmoid(tape, add_row(tape, matmul_bt(tape, xm, w_reset_), b_reset_));

    Tensor hm = as_matrix(tape, h_prev);
    Tensor rh = mul(tape, r, hm);
    Tensor x_rh = concat(tape, as_matrix(tape, x), rh);
    Tensor cand = tanh(tape, add_row(tape, matmul_bt(tape, x_rh, w_cand_), b_cand_));

    // h' = (1 - z) .* h + z .* cand
    Tensor one_minus_z = add_const(tape, scale(tape, z, -1.0), 1.0);
    Tensor keep = mul(tape, one_minus_z, hm);
    Tensor take = mul(tape, z, cand);
    Tensor h_new = add(tape, keep, take);
    return vector_input ? take_row(tape, h_new, 0) : h_new;
}

void GruCell::register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.push_back({prefix + ".w_update", w_update_});
    reg.push_back({prefix + ".b_update", b_update_});
    reg.push_back({prefix + ".w_reset", w_reset_});
    reg.push_back({prefix + ".b_reset", b_reset_});
    reg.push_back({prefix + ".w_cand", w_cand_});
    reg.push_back({prefix + ".b_cand", b_cand_});
}

// --- LstmCell ---------------------------------------------------------------

LstmCell::LstmCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
    const std::size_t joint = input_dim + hidden_dim;
    w_input_ = init_weight(hidden_dim, joint, rng);
    b_input_ = init_bias(hidden_dim);
    w_forget_ = init_weight(hidden_dim, joint, rng);
    b_forget_ = init_bias(hidden_dim);
    w_output_ = init_weight(hidden_dim, joint, rng);
    b_output_ = init_bias(hidden_dim);
    w_cand_ = init_weight(hidden_dim, joint, rng);
    b_cand_ = init_bias(hidden_dim);
    assert(param_count() == 4 * (input_dim + hidden_dim + 1) * hidden_dim);
}

std::size_t LstmCell::param_count() const {
    return w_input_.size() + b_input_.size() + w_forget_.size() + b_forget_.size() +
           w_output_.size() + b_output_.size() + w_cand_.size() + b_cand_.size();
}

std::pair<Tensor, Tensor> LstmCell::step(Tape& tape, const Tensor& x, const Tensor& h_prev,
                                         const Tensor& c_prev) const {
    const bool vector_input = x.rank() == 1;
    const std::size_t xw = vector_input ? x.size() : x.cols();
    const std::size_t hw = h_prev.rank() == 1 ? h_prev.size() : h_prev.cols();
    const std::size_t cw = c_prev.rank() == 1 ? c_prev.size() : c_prev.cols();
    if (xw != input_dim_ || hw != hidden_dim_ || cw != hidden_dim_)
        throw DimensionError("lstm: input/hidden widths do not match cell");
    if (x.rank() != h_prev.rank() || x.rank() != c_prev.rank())
        throw DimensionError("lstm: x, h_prev, c_prev must share rank");

    Tensor xh = as_matrix(tape, concat(tape, x, h_prev));
    Tensor cm = as_matrix(tape, c_prev);

    Tensor gate_i = sigmoid(tape, add_row(tape, matmul_bt(tape, xh, w_input_), b_input_));
    Tensor gate_f = sigmoid(tape, add_row(tape, matmul_bt(tape, xh, w_forget_), b_forget_));
    Tensor gate_o = sigmoid(tape, add_row(tape, matmul_bt(tape, xh, w_output_), b_output_));
    Tensor cand = tanh(tape, add_row(tape, matmul_bt(tape, xh, w_cand_), b_cand_));

    Tensor c_new = add(tape, mul(tape, gate_f, cm), mul(tape, gate_i, cand));
    Tensor h_new = mul(tape, gate_o, tanh(tape, c_new));

    if (vector_input)
        return {take_row(tape, h_new, 0), take_row(tape, c_new, 0)};
    return {h_new, c_new};
}

void LstmCell::register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.push_back({prefix + ".w_input", w_input_});
    reg.push_back({prefix + ".b_input", b_input_});
    reg.push_back({prefix + ".w_forget", w_forget_});
    reg.push_back({prefix + ".b_forget", b_forget_});
    reg.push_back({prefix + ".w_output", w_output_});
    reg.push_back({prefix + ".b_output", b_output_});
    reg.push_back({prefix + ".w_cand", w_cand_});
    reg.push_back({prefix + ".b_cand", b_cand_});
}

// --- DynamicsNet -------------------------------------------------------------

DynamicsNet::DynamicsNet(std::size_t latent_dim, std::size_t width, Rng& rng)
    : latent_dim_(latent_dim), fc1_(latent_dim + 1, width, rng), fc2_(width, latent_dim, rng) {}

Tensor DynamicsNet::eval(Tape& tape, const Tensor& z, double t) const {
    const bool vector_input = z.rank() == 1;
    const std::size_t zw = vector_input ? z.size() : z.cols();
    if (zw != latent_dim_)
        throw DimensionError("dynamics: latent width does not match net");
    Tensor zm = as_matrix(tape, z);
    Tensor tcol = Tensor::full({zm.rows(), 1}, t);
    Tensor zt = concat(tape, zm, tcol);
    Tensor hidden = tanh(tape, fc1_.apply(tape, zt));
    Tensor out = fc2_.apply(tape, hidden);
    return vector_input ? take_row(tape, out, 0) : out;
}

void DynamicsNet::register_params(ParamRegistry& reg, const std::string& prefix) const {
    fc1_.register_params(reg, prefix + ".fc1");
    fc2_.register_params(reg, prefix + ".fc2");
}

} // namespace odecast
