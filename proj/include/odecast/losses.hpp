#pragma once

#include "odecast/model.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

struct LossBreakdown {
    double mse = 0.0;
    double kl = 0.0;
    double l1 = 0.0;
    double total = 0.0;
};

// Mean of squared differences.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& truth);

// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)), i.e. KL(q || N(0, I)) with the
// log-variance parameterisation. Batched inputs are averaged over rows.
Tensor kl_loss(Tape& tape, const LatentDistribution& dist);

// 0.01 * sum |z_i| over the latent code; batched inputs averaged over rows.
Tensor l1_loss(Tape& tape, const Tensor& z);

} // namespace odecast
