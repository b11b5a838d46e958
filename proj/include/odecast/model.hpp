#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "odecast/layers.hpp"
#include "odecast/odesolver.hpp"
#include "odecast/params.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

struct ModelConfig {
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 64;
    std::size_t latent_dim = 64;
    std::size_t lag = 24;
    std::size_t horizon = 1;
    std::size_t target_dim = 1;
    std::uint64_t seed = 0;
    bool til_enabled = true;
    double max_step = 0.05;

    bool operator==(const ModelConfig&) const = default;
};

// Per-window posterior parameters; [latent] for a single window or
// [batch x latent] when windows are batched.
struct LatentDistribution {
    Tensor mu;
    Tensor logvar;
};

// Temporal-isolation recurrent state carried across stream steps.
struct OnlineState {
    Tensor hidden; // [hidden_dim]
    Tensor cell;   // [hidden_dim]
};

// GRU encoder -> latent Gaussian -> Euler-integrated latent trajectory ->
// linear heads, with an LSTM path over the most recent window fused in for
// the online forecast.
class OdeForecaster {
public:
    explicit OdeForecaster(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    // Trainable tensors in a fixed order; shared handles, so optimizer updates
    // through the registry are visible to the layers.
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }

    // Parameters that only the warm-up objective trains (the reconstruction
    // head); everything else must receive a gradient every online step.
    bool is_warmup_only(const std::string& name) const;

    // --- encoder ------------------------------------------------------------
    // steps[t] is [input_dim] or [batch x input_dim]; consumed in time order.
    LatentDistribution encode_steps(Tape& tape, const std::vector<Tensor>& steps) const;
    // window is [rows x input_dim]; rows become individual GRU steps.
    LatentDistribution encode(Tape& tape, const Tensor& window) const;

    // z0 = mu + eps .* exp(0.5 * logvar)
    Tensor reparameterize(Tape& tape, const LatentDistribution& dist, const Tensor& eps) const;

    // --- decoder ------------------------------------------------------------
    struct Decoded {
        Trajectory trajectory;
        std::vector<Tensor> hidden;          // latent_to_hidden at each grid point
        std::vector<Tensor> reconstruction;  // recon head at each grid point
    };
    Decoded decode_window(Tape& tape, const Tensor& z0, const TimeGrid& grid,
                          bool with_reconstruction = true) const;

    // --- online path ----------------------------------------------------------
    // Runs the isolation LSTM over the window rows from `state`; returns the
    // final hidden and the advanced state.
    std::pair<Tensor, OnlineState> til_forward(Tape& tape, const Tensor& window,
                                               const OnlineState& state) const;

    // concat(h_til, h_ode) -> fusion -> output head; without the isolation
    // layer the output head reads h_ode directly.
    Tensor fuse_and_predict(Tape& tape, const Tensor& h_ode, const Tensor& h_til) const;

    OnlineState initial_state() const;

    // --- persistence -----------------------------------------------------------
    void checkpoint_save(const std::string& path) const;
    static OdeForecaster checkpoint_load(const std::string& path);
    // Loads into an existing model; throws ConfigMismatchError if the file's
    // config disagrees with this model's.
    void checkpoint_restore(const std::string& path);

    std::uint64_t checkpoint_checksum() const;

    // Retained model state in doubles (buffer-freedom probe).
    std::size_t retained_value_count() const;

private:
    ModelConfig config_;
    GruCell encoder_;
    LinearLayer latent_proj_; // hidden -> 2*latent (mu rows then logvar rows)
    DynamicsNet dynamics_;
    LinearLayer latent_to_hidden_;
    LinearLayer recon_head_;  // hidden -> input_dim, warm-up reconstruction
    LinearLayer output_head_; // hidden -> target_dim * horizon
    LstmCell til_;
    LinearLayer concat_head_; // 2*hidden -> hidden
    ParamRegistry params_;

    void build_registry();
};

} // namespace odecast
