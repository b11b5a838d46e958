#include "odecast/losses.hpp"

#include "odecast/errors.hpp"

namespace odecast {

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape())
        throw DimensionError("mse_loss: prediction and truth shapes differ");
    return mean(tape, square(tape, sub(tape, pred, truth)));
}

Tensor kl_loss(Tape& tape, const LatentDistribution& dist) {
    if (dist.mu.shape() != dist.logvar.shape())
        throw DimensionError("kl_loss: mu and logvar shapes differ");
    // -0.5 * sum(1 + logvar - mu^2 - exp(logvar))
    Tensor inner = sub(tape, add_const(tape, dist.logvar, 1.0),
                       add(tape, square(tape, dist.mu), exp(tape, dist.logvar)));
    Tensor total = scale(tape, sum(tape, inner), -0.5);
    const std::size_t batch = dist.mu.rank() == 2 ? dist.mu.rows() : 1;
    return batch > 1 ? scale(tape, total, 1.0 / static_cast<double>(batch)) : total;
}

Tensor l1_loss(Tape& tape, const Tensor& z) {
    Tensor total = scale(tape, sum(tape, abs(tape, z)), 0.01);
    const std::size_t batch = z.rank() == 2 ? z.rows() : 1;
    return batch > 1 ? scale(tape, total, 1.0 / static_cast<double>(batch)) : total;
}

} // namespace odecast
